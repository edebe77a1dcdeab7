use std::collections::BTreeSet;
use std::path::Path;

use analogy_core::datagen::{GeneratedTask, TaskJson};
use analogy_core::grid::{board_equal, Domain};
use analogy_core::harness::{
    build_tasks, encoder_experiment, export_embeddings, run_hit_ratio, run_search_benchmark, separation,
    write_embeddings_csv, ExperimentConfig, Schedule, Trainer,
};
use analogy_core::search::{solve_task, Algorithm};
use analogy_core::vm::SymbolicExecutor;

/// A configuration small enough to train in a few seconds.
fn quick(out: Option<&Path>) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.model.autoencoder = Schedule::new(0.02, 8, 60, 0.001);
    c.model.transform_training = Schedule::new(0.005, 8, 40, 0.02);
    c.tasks.lengths = vec![2, 3];
    c.tasks.per_length = 6;
    c.out_dir = out.map(Path::to_path_buf);
    c
}

fn cache_entries(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir.join("cache"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn tasks_are_solvable_and_independent_of_training_seed() {
    let d = Domain::default();
    let c = quick(None);
    let tasks = build_tasks(&d, &c).unwrap();
    assert_eq!(tasks.len(), 12);
    let ex = SymbolicExecutor { domain: &d };
    for gt in &tasks {
        let (pred, _) = solve_task(&ex, &d.shift_transforms(), &gt.task, &c.search).unwrap();
        assert!(board_equal(&d, &pred.unwrap(), &gt.expected));
    }
    let mut other = c.clone();
    other.seeds.train = 9;
    let again = build_tasks(&d, &other).unwrap();
    let text = |ts: &[GeneratedTask]| ts.iter().map(|t| t.program.to_text(&d)).collect::<Vec<_>>();
    assert_eq!(text(&tasks), text(&again));
}

#[test]
fn task_json_round_trips() {
    let d = Domain::default();
    let gt = &build_tasks(&d, &quick(None)).unwrap()[0];
    let json: TaskJson = serde_json::from_str(&serde_json::to_string(&gt.to_json(&d)).unwrap()).unwrap();
    let back = GeneratedTask::from_json(&d, &json).unwrap();
    assert_eq!(back.program, gt.program);
    assert_eq!(back.task.examples.len(), gt.task.examples.len());
    assert!(board_equal(&d, &back.task.query, &gt.task.query));
    assert!(board_equal(&d, &back.expected, &gt.expected));
}

#[test]
fn cache_is_reused_and_reports_add_up() {
    let d = Domain::default();
    let dir = tempfile::tempdir().unwrap();
    let c = quick(Some(dir.path()));
    let trainer = Trainer::for_config(&d, &c);
    let first = run_hit_ratio(&d, &c, &trainer).unwrap();
    let entries = cache_entries(dir.path());
    assert_eq!(entries.len(), 2, "{entries:?}");
    assert!(entries.iter().all(|e| dir.path().join("cache").join(e).join("done").exists()));

    let second = run_hit_ratio(&d, &c, &trainer).unwrap();
    assert_eq!(cache_entries(dir.path()), entries);
    assert_eq!(first.hits, second.hits);
    let fresh = Trainer::new(&d, None).train(&c).unwrap();
    let cached = trainer.train(&c).unwrap();
    assert_eq!(fresh.transforms, cached.transforms);

    for r in [&first, &second] {
        assert_eq!(r.tasks, 12);
        assert_eq!(r.hits + r.misses + r.timeouts, r.tasks);
        assert_eq!(r.per_length.iter().map(|l| l.tasks).sum::<usize>(), r.tasks);
        assert!(r.per_length.iter().all(|l| l.hit_ratio == l.hits as f64 / l.tasks as f64));
    }

    // Changing only the transform schedule leaves the autoencoder cached.
    let mut longer = c.clone();
    longer.model.transform_training.epochs += 1;
    trainer.train(&longer).unwrap();
    let grown = cache_entries(dir.path());
    assert_eq!(grown.len(), 3);
    assert!(entries.is_subset(&grown));
}

#[test]
fn benchmark_rows_cover_each_algorithm_and_length() {
    let d = Domain::default();
    let c = quick(None);
    let rows = run_search_benchmark(&d, &c, &Trainer::new(&d, None), &[Algorithm::Naive, Algorithm::Pruned]).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.tasks == 6 && r.solved + r.timeouts <= r.tasks));
}

#[test]
fn embeddings_cover_every_piece() {
    let d = Domain::default();
    let space = Trainer::new(&d, None).space(&quick(None)).unwrap();
    let rows = export_embeddings(&d, &space).unwrap();
    assert_eq!(rows.len(), 180);
    assert!(rows.iter().all(|r| r.z.len() == space.latent_dim()));
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            assert!(a.z.iter().zip(&b.z).any(|(x, y)| (x - y).abs() > 1e-9), "{} {} {}", a.shape, a.x, a.y);
        }
    }
    let mut buf = Vec::new();
    write_embeddings_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 181);
    assert!(lines.iter().all(|l| l.split(',').count() == 3 + space.latent_dim()));

    let sep = separation(&d, &space).unwrap();
    assert!(sep.same_cell > 0.0 && sep.same_shape > 0.0 && sep.overall > 0.0);
}

#[test]
fn encoder_experiments_partition_shapes() {
    let d = Domain::default();
    let c = ExperimentConfig::default();
    let count = |s: &Option<Vec<String>>| s.as_ref().unwrap().len();
    for k in [1, 5, 19] {
        let one = encoder_experiment(&d, &c, 1, k).unwrap().unwrap();
        assert_eq!((count(&one.data.encoder_shapes), count(&one.data.test_shapes)), (k, 20));
        assert_eq!(count(&one.data.vocab_shapes), 0);
        let two = encoder_experiment(&d, &c, 2, k).unwrap().unwrap();
        assert_eq!(count(&two.data.test_shapes), 20 - k);
        let seen: BTreeSet<_> = two.data.encoder_shapes.unwrap().into_iter().collect();
        assert!(two.data.test_shapes.unwrap().iter().all(|s| !seen.contains(s)));
        let three = encoder_experiment(&d, &c, 3, k).unwrap().unwrap();
        assert_eq!(count(&three.data.vocab_shapes), 4);
        three.validate(&d).unwrap();
    }
    assert!(encoder_experiment(&d, &c, 2, 20).unwrap().is_none());
    assert!(encoder_experiment(&d, &c, 4, 20).unwrap().is_none());
    assert!(encoder_experiment(&d, &c, 5, 1).is_err());
    assert!(encoder_experiment(&d, &c, 1, 0).is_err());
    assert!(encoder_experiment(&d, &c, 1, 21).is_err());
    let small = encoder_experiment(&d, &c, 1, 2).unwrap().unwrap().data.encoder_shapes.unwrap();
    let large = encoder_experiment(&d, &c, 1, 10).unwrap().unwrap().data.encoder_shapes.unwrap();
    assert_eq!(small[..], large[..2]);
}

#[test]
fn config_defaults_and_validation() {
    let d = Domain::default();
    let parsed = ExperimentConfig::from_json("{}").unwrap();
    assert_eq!(parsed, ExperimentConfig::default());
    parsed.validate(&d).unwrap();
    let round = ExperimentConfig::from_json(&serde_json::to_string(&parsed).unwrap()).unwrap();
    assert_eq!(round, parsed);

    let partial = ExperimentConfig::from_json(r#"{"data": {"max_pieces": 1}, "seeds": {"train": 4}}"#).unwrap();
    assert_eq!((partial.data.min_pieces, partial.data.max_pieces), (1, 1));
    assert_eq!((partial.seeds.train, partial.seeds.tasks), (4, 1));

    let bad = [
        r#"{"data": {"vocab_shapes": ["nonsense"]}}"#,
        r#"{"data": {"min_pieces": 3, "max_pieces": 2}}"#,
        r#"{"data": {"max_pieces": 10}}"#,
        r#"{"data": {"test_shapes": []}}"#,
        r#"{"data": {"held_out_cells": [[0,0],[0,1],[0,2],[1,0],[1,1],[1,2],[2,0],[2,1],[2,2]]}}"#,
        r#"{"data": {"held_out_cells": [[3,0]]}}"#,
        r#"{"data": {"vocab_shapes": ["square"]}, "model": {"transforms": ["to-circle"]}}"#,
        r#"{"model": {"latent": "image-to-symbolic"}, "data": {"encoder_shapes": []}}"#,
        r#"{"model": {"transforms": []}}"#,
        r#"{"model": {"transform_training": {"learning_rate": -1, "batch_size": 8, "epochs": 1}}}"#,
        r#"{"tasks": {"lengths": [0]}}"#,
    ];
    for text in bad {
        let rejected = ExperimentConfig::from_json(text).and_then(|c| c.validate(&d));
        assert!(rejected.is_err(), "{text}");
    }
}
