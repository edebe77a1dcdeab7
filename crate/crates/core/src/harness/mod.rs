//! Experiment driver: configuration, cached training, and the evaluation
//! suites (hit ratio, generalisation sweeps, search timing, embeddings).

mod artifacts;
mod config;
mod eval;
mod export;

pub use artifacts::{Artifacts, Trainer};
pub use config::{DataSpec, ExperimentConfig, ModelSpec, Schedule, Seeds, TaskSpec};
pub use eval::{
    build_tasks, encoder_experiment, run_encoder_generalisation, run_hit_ratio, run_search_benchmark,
    run_transform_generalisation, shape_order, solve_all, write_bench_csv, BenchRow, EvalReport, LengthRow,
    Outcome, SweepAxis, TaskResult, LABELLED_SHAPES,
};
pub use export::{export_embeddings, separation, write_embeddings_csv, EmbeddingRow, Separation};
