use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifacts::{Artifacts, Trainer};
use super::config::ExperimentConfig;
use crate::datagen::{build_dataset, make_task, BoardSampler, GeneratedTask};
use crate::error::{Error, Result};
use crate::grid::{board_equal, Domain, ShapeId};
use crate::latent::SpaceKind;
use crate::search::{solve_task, Algorithm, SearchConfig, SearchStats};
use crate::vm::NeuralExecutor;

/// Tasks for every configured length, drawn from the configured dataset.
/// Depends only on the task seed, the dataset and the board settings.
pub fn build_tasks(domain: &Domain, cfg: &ExperimentConfig) -> Result<Vec<GeneratedTask>> {
    let spec = &cfg.tasks.dataset;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.tasks);
    let dataset = build_dataset(domain, spec, cfg.seeds.tasks, &mut rng)?;
    let sampler = BoardSampler {
        shapes: cfg.test_shapes(domain)?,
        min_pieces: cfg.data.min_pieces,
        max_pieces: cfg.data.max_pieces,
    };
    let mut tasks = Vec::new();
    for &len in &cfg.tasks.lengths {
        let pool: Vec<_> = dataset.of_length(len).collect();
        if pool.is_empty() {
            return Err(Error::Config(format!("dataset {} has no programs of length {len}", spec.name)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.tasks);
        rng.set_stream(len as u64);
        for _ in 0..cfg.tasks.per_length {
            let program = *pool.choose(&mut rng).expect("non-empty pool");
            tasks.push(make_task(domain, program, cfg.tasks.examples, &sampler, &mut rng)?);
        }
    }
    Ok(tasks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Hit,
    Miss,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub length: usize,
    pub outcome: Outcome,
    pub found: Option<String>,
    pub stats: SearchStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub length: usize,
    pub tasks: usize,
    pub hits: usize,
    pub misses: usize,
    pub timeouts: usize,
    pub hit_ratio: f64,
    pub mean_nodes: f64,
    pub mean_wall_ms: f64,
    pub max_wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub tasks: usize,
    pub hits: usize,
    pub misses: usize,
    pub timeouts: usize,
    pub hit_ratio: f64,
    pub per_length: Vec<LengthRow>,
    pub nodes_expanded: u64,
    pub prunes_wrong_element: u64,
    pub prunes_fewer_matches: u64,
    pub wall_ms: f64,
    pub config: ExperimentConfig,
}

impl EvalReport {
    pub fn from_results(label: impl Into<String>, cfg: &ExperimentConfig, results: &[TaskResult]) -> Self {
        let mut by_len: BTreeMap<usize, Vec<&TaskResult>> = BTreeMap::new();
        for r in results {
            by_len.entry(r.length).or_default().push(r);
        }
        let count = |rs: &[&TaskResult], o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
        let per_length = by_len
            .into_iter()
            .map(|(length, rs)| {
                let n = rs.len();
                let hits = count(&rs, Outcome::Hit);
                LengthRow {
                    length,
                    tasks: n,
                    hits,
                    misses: count(&rs, Outcome::Miss),
                    timeouts: count(&rs, Outcome::Timeout),
                    hit_ratio: hits as f64 / n as f64,
                    mean_nodes: rs.iter().map(|r| r.stats.nodes_expanded as f64).sum::<f64>() / n as f64,
                    mean_wall_ms: rs.iter().map(|r| r.stats.wall_ms).sum::<f64>() / n as f64,
                    max_wall_ms: rs.iter().map(|r| r.stats.wall_ms).fold(0.0, f64::max),
                }
            })
            .collect::<Vec<_>>();
        let hits = per_length.iter().map(|r| r.hits).sum::<usize>();
        let tasks = results.len();
        Self {
            label: label.into(),
            tasks,
            hits,
            misses: per_length.iter().map(|r| r.misses).sum(),
            timeouts: per_length.iter().map(|r| r.timeouts).sum(),
            hit_ratio: if tasks == 0 { 0.0 } else { hits as f64 / tasks as f64 },
            per_length,
            nodes_expanded: results.iter().map(|r| r.stats.nodes_expanded).sum(),
            prunes_wrong_element: results.iter().map(|r| r.stats.prunes_wrong_element).sum(),
            prunes_fewer_matches: results.iter().map(|r| r.stats.prunes_fewer_matches).sum(),
            wall_ms: results.iter().map(|r| r.stats.wall_ms).sum(),
            config: cfg.clone(),
        }
    }

    pub fn ratio_at(&self, length: usize) -> Option<f64> {
        self.per_length.iter().find(|r| r.length == length).map(|r| r.hit_ratio)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.per_length {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn search_config(cfg: &ExperimentConfig, search: &SearchConfig, length: usize) -> SearchConfig {
    let max_depth = if cfg.depth_from_task { length } else { search.max_depth };
    SearchConfig { max_depth, ..search.clone() }
}

/// Solve every task with `search` and classify the outcomes. Results keep the
/// order of `tasks` whatever the scheduling.
pub fn solve_all(
    domain: &Domain,
    cfg: &ExperimentConfig,
    art: &Artifacts,
    search: &SearchConfig,
    tasks: &[GeneratedTask],
) -> Result<Vec<TaskResult>> {
    let ex = NeuralExecutor::new(domain, &art.space, &art.transforms)?;
    let ids = art.transforms.ids();
    tasks
        .par_iter()
        .map(|gt| {
            let length = gt.program.len();
            let (pred, res) = solve_task(&ex, ids, &gt.task, &search_config(cfg, search, length))?;
            let hit = pred.is_some_and(|p| board_equal(domain, &p, &gt.expected));
            let outcome = match (hit, res.stats.timed_out) {
                (true, _) => Outcome::Hit,
                (false, true) => Outcome::Timeout,
                (false, false) => Outcome::Miss,
            };
            Ok(TaskResult { length, outcome, found: res.program.map(|p| p.to_text(domain)), stats: res.stats })
        })
        .collect()
}

pub fn run_hit_ratio(domain: &Domain, cfg: &ExperimentConfig, trainer: &Trainer) -> Result<EvalReport> {
    let art = trainer.train(cfg)?;
    let tasks = build_tasks(domain, cfg)?;
    let results = solve_all(domain, cfg, &art, &cfg.search, &tasks)?;
    Ok(EvalReport::from_results("hit-ratio", cfg, &results))
}

/// A fixed shuffle of the domain's shapes, so sweeps grow nested subsets.
pub fn shape_order(domain: &Domain, seed: u64) -> Vec<ShapeId> {
    let mut shapes: Vec<ShapeId> = domain.shapes().collect();
    shapes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    shapes
}

fn names(domain: &Domain, shapes: &[ShapeId]) -> Vec<String> {
    shapes.iter().map(|&s| domain.name(s).to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Shapes,
    Positions,
}

/// Retrain transforms on the first `k` shapes (or cells) of a fixed order for
/// each `k`, keeping the latent space and the task set fixed.
pub fn run_transform_generalisation(
    domain: &Domain,
    cfg: &ExperimentConfig,
    trainer: &Trainer,
    axis: SweepAxis,
    sizes: &[usize],
) -> Result<Vec<EvalReport>> {
    let tasks = build_tasks(domain, cfg)?;
    let shapes = shape_order(domain, cfg.seeds.tasks);
    let mut cells: Vec<_> = domain.cells().collect();
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seeds.tasks));
    let mut reports = Vec::new();
    for &k in sizes {
        let mut c = cfg.clone();
        match axis {
            SweepAxis::Shapes => {
                if k == 0 || k > shapes.len() {
                    return Err(Error::Config(format!("cannot train transforms on {k} shapes")));
                }
                c.data.transform_shapes = Some(names(domain, &shapes[..k]));
            }
            SweepAxis::Positions => {
                if k == 0 || k > cells.len() {
                    return Err(Error::Config(format!("cannot train transforms on {k} cells")));
                }
                c.data.held_out_cells = cells[k..].iter().map(|p| [p.x as usize, p.y as usize]).collect();
            }
        }
        let art = trainer.train(&c)?;
        let results = solve_all(domain, &c, &art, &c.search, &tasks)?;
        let label = match axis {
            SweepAxis::Shapes => format!("transform-shapes={k}"),
            SweepAxis::Positions => format!("transform-cells={k}"),
        };
        reports.push(EvalReport::from_results(label, &c, &results));
    }
    Ok(reports)
}

/// Shapes with their own slot in experiments 3 and 4.
pub const LABELLED_SHAPES: [&str; 4] = ["square", "triangle", "circle", "delta"];

/// The configuration for one point of an encoder generalisation experiment.
///
/// Experiments 1 and 2 label no shape, 3 and 4 label [`LABELLED_SHAPES`];
/// transforms see the labelled shapes only. The image encoder sees the first
/// `k` shapes of a fixed order. Experiments 1 and 3 test on every shape, 2
/// and 4 on the shapes the encoder never saw. Returns `None` when nothing is
/// left to test on.
pub fn encoder_experiment(
    domain: &Domain,
    cfg: &ExperimentConfig,
    experiment: u8,
    k: usize,
) -> Result<Option<ExperimentConfig>> {
    let labelled: Vec<String> = match experiment {
        1 | 2 => Vec::new(),
        3 | 4 => LABELLED_SHAPES.iter().map(|s| s.to_string()).collect(),
        _ => return Err(Error::Config(format!("unknown encoder experiment {experiment}"))),
    };
    let order = shape_order(domain, cfg.seeds.tasks);
    if k == 0 || k > order.len() {
        return Err(Error::Config(format!("cannot train an encoder on {k} shapes")));
    }
    let seen = &order[..k];
    let test = if experiment % 2 == 1 { order.clone() } else { order[k..].to_vec() };
    if test.is_empty() {
        return Ok(None);
    }
    let mut c = cfg.clone();
    c.model.latent = SpaceKind::ImageToSymbolic;
    c.data.vocab_shapes = Some(labelled.clone());
    c.data.transform_shapes = Some(labelled);
    c.data.encoder_shapes = Some(names(domain, seen));
    c.data.test_shapes = Some(names(domain, &test));
    Ok(Some(c))
}

pub fn run_encoder_generalisation(
    domain: &Domain,
    cfg: &ExperimentConfig,
    trainer: &Trainer,
    experiment: u8,
    sizes: &[usize],
) -> Result<Vec<EvalReport>> {
    let mut reports = Vec::new();
    for &k in sizes {
        let Some(c) = encoder_experiment(domain, cfg, experiment, k)? else { continue };
        let art = trainer.train(&c)?;
        let tasks = build_tasks(domain, &c)?;
        let results = solve_all(domain, &c, &art, &c.search, &tasks)?;
        reports.push(EvalReport::from_results(format!("encoder-exp{experiment}-shapes={k}"), &c, &results));
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub length: usize,
    pub tasks: usize,
    pub solved: usize,
    pub timeouts: usize,
    pub mean_nodes: f64,
    pub mean_wall_ms: f64,
    pub max_wall_ms: f64,
}

/// Time each algorithm on the same tasks. Timeouts are recorded, not fatal.
pub fn run_search_benchmark(
    domain: &Domain,
    cfg: &ExperimentConfig,
    trainer: &Trainer,
    algorithms: &[Algorithm],
) -> Result<Vec<BenchRow>> {
    let art = trainer.train(cfg)?;
    let tasks = build_tasks(domain, cfg)?;
    let mut rows = Vec::new();
    for &algorithm in algorithms {
        let search = SearchConfig { algorithm, ..cfg.search.clone() };
        let results = solve_all(domain, cfg, &art, &search, &tasks)?;
        for lr in EvalReport::from_results("bench", cfg, &results).per_length {
            rows.push(BenchRow {
                algorithm,
                length: lr.length,
                tasks: lr.tasks,
                solved: lr.hits,
                timeouts: lr.timeouts,
                mean_nodes: lr.mean_nodes,
                mean_wall_ms: lr.mean_wall_ms,
                max_wall_ms: lr.max_wall_ms,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
