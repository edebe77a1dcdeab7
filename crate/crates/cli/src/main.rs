use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use analogy_core::datagen::{build_dataset, DatasetSpec};
use analogy_core::grid::Domain;
use analogy_core::harness::{
    export_embeddings, run_encoder_generalisation, run_hit_ratio, run_search_benchmark, run_transform_generalisation,
    separation, write_bench_csv, write_embeddings_csv, EvalReport, ExperimentConfig, SweepAxis, Trainer,
};
use analogy_core::search::Algorithm;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "analogy", version, about = "Train latent transforms and search for programs that solve board analogies")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON). Defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and the training cache.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or load from cache) the configured latent space and transforms.
    Train,
    #[command(subcommand)]
    Eval(Eval),
    #[command(subcommand)]
    Bench(Bench),
    #[command(subcommand)]
    Datagen(Datagen),
    #[command(subcommand)]
    Export(Export),
}

#[derive(Subcommand)]
enum Eval {
    /// Hit ratio per program length.
    HitRatio,
    /// Retrain transforms on growing subsets of shapes or cells.
    GenTransforms {
        #[arg(long, value_enum, default_value = "shapes")]
        axis: Axis,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 5, 10, 20])]
        sizes: Vec<usize>,
    },
    /// Retrain the image encoder on growing subsets of shapes.
    GenEncoder {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        experiment: u8,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 5, 10, 19, 20])]
        sizes: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Shapes,
    Positions,
}

#[derive(Subcommand)]
enum Bench {
    /// Wall time and nodes expanded per length for each algorithm.
    Search {
        #[arg(long, value_delimiter = ',', default_values = ["naive", "pruned"])]
        algorithms: Vec<String>,
    },
}

#[derive(Subcommand)]
enum Datagen {
    /// Build a program dataset and write it as text plus a JSON manifest.
    Build {
        /// `r20all`, `r20shift`, or a path to a dataset spec (JSON).
        #[arg(long, default_value = "r20all")]
        dataset: String,
    },
}

#[derive(Subcommand)]
enum Export {
    /// Latent vector of every single-piece board, as CSV.
    Embeddings,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seeds.train = s;
    }
    if let Some(d) = &g.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(PathBuf::from("runs"));
    }
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn write_reports(dir: &Path, stem: &str, reports: &[EvalReport]) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), &reports)?;
    for r in reports {
        r.write_csv(File::create(dir.join(format!("{}.csv", r.label)))?)?;
        let lengths: Vec<String> = r.per_length.iter().map(|l| format!("{}:{:.3}", l.length, l.hit_ratio)).collect();
        println!(
            "{:<28} hit-ratio {:.3} ({}/{}, {} timeouts)  {}",
            r.label,
            r.hit_ratio,
            r.hits,
            r.tasks,
            r.timeouts,
            lengths.join(" ")
        );
    }
    Ok(())
}

fn parse_algorithm(name: &str) -> Result<Algorithm> {
    Ok(match name {
        "naive" => Algorithm::Naive,
        "pruned" => Algorithm::Pruned,
        "beam" => Algorithm::Beam,
        _ => bail!("unknown algorithm `{name}` (expected naive, pruned or beam)"),
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let domain = Domain::default();
    let cfg = load_config(&cli.global)?;
    cfg.validate(&domain)?;
    let out = cfg.out_dir.clone().expect("set by load_config");
    std::fs::create_dir_all(&out)?;
    let trainer = Trainer::for_config(&domain, &cfg);
    match cli.command {
        Command::Train => {
            let art = trainer.train(&cfg)?;
            println!(
                "trained {:?} space (latent {}) with {} transforms; cache in {}",
                art.space.kind(),
                art.space.latent_dim(),
                art.transforms.ids().len(),
                out.join("cache").display()
            );
        }
        Command::Eval(Eval::HitRatio) => {
            let report = run_hit_ratio(&domain, &cfg, &trainer)?;
            write_reports(&out, "hit-ratio", &[report])?;
        }
        Command::Eval(Eval::GenTransforms { axis, sizes }) => {
            let axis = match axis {
                Axis::Shapes => SweepAxis::Shapes,
                Axis::Positions => SweepAxis::Positions,
            };
            let reports = run_transform_generalisation(&domain, &cfg, &trainer, axis, &sizes)?;
            write_reports(&out, "gen-transforms", &reports)?;
        }
        Command::Eval(Eval::GenEncoder { experiment, sizes }) => {
            let reports = run_encoder_generalisation(&domain, &cfg, &trainer, experiment, &sizes)?;
            write_reports(&out, &format!("gen-encoder-{experiment}"), &reports)?;
        }
        Command::Bench(Bench::Search { algorithms }) => {
            let algs = algorithms.iter().map(|a| parse_algorithm(a)).collect::<Result<Vec<_>>>()?;
            let rows = run_search_benchmark(&domain, &cfg, &trainer, &algs)?;
            write_bench_csv(&rows, File::create(out.join("search-bench.csv"))?)?;
            for r in &rows {
                println!(
                    "{:<7} len {:>2}: solved {}/{} timeouts {} nodes {:.0} mean {:.1} ms max {:.1} ms",
                    format!("{:?}", r.algorithm).to_lowercase(),
                    r.length,
                    r.solved,
                    r.tasks,
                    r.timeouts,
                    r.mean_nodes,
                    r.mean_wall_ms,
                    r.max_wall_ms
                );
            }
        }
        Command::Datagen(Datagen::Build { dataset }) => {
            let spec = match dataset.as_str() {
                "r20all" => DatasetSpec::r20all(&domain),
                "r20shift" => DatasetSpec::r20shift(&domain),
                path => serde_json::from_str(&std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?)?,
            };
            let seed = cfg.seeds.tasks;
            let ds = build_dataset(&domain, &spec, seed, &mut ChaCha8Rng::seed_from_u64(seed))?;
            ds.save(&domain, &out)?;
            println!("{}: {} programs written to {}", ds.name, ds.len(), out.display());
        }
        Command::Export(Export::Embeddings) => {
            let space = trainer.space(&cfg)?;
            let rows = export_embeddings(&domain, &space)?;
            write_embeddings_csv(&rows, File::create(out.join("embeddings.csv"))?)?;
            let sep = separation(&domain, &space)?;
            write_json(&out.join("separation.json"), &sep)?;
            println!(
                "{} rows; mean distance same cell {:.3}, same shape {:.3}, overall {:.3}",
                rows.len(),
                sep.same_cell,
                sep.same_shape,
                sep.overall
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
