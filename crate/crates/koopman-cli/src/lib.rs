//! Library half of the CLI: experiment configuration, the run driver, the
//! timing harness, and CSV ingestion. The binary in `main.rs` is a thin
//! argument-parsing layer over these.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod ingest;

pub use bench::{bench_compare, loglog_slope, CheckpointTiming, TimingReport};
pub use config::{
    BurgersParams, DictionaryKind, DictionarySpec, ExperimentConfig, PredictionMode,
    PredictionSpec, RingParams, SystemKind, TimingSpec,
};
pub use experiment::{build_data, build_dictionary, run_experiment, RunArtifacts};
pub use ingest::ingest_csv;
