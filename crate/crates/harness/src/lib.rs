//! Experiment harness for graph-learning GCN runs: repeated training with
//! per-run logs, checkpoints and adjacency heatmaps, the `lambda0` ablation
//! and the label-rate robustness sweep.

use std::path::PathBuf;

pub mod config;
pub mod experiment;
pub mod heatmap;
pub mod output;
pub mod presets;

pub use config::{build_spec, parse_pairs, ExperimentSpec};
pub use experiment::{
    evaluate_checkpoint, load_dataset, run_lambda0_sweep, run_robustness_sweep, run_single,
    CurvePoint, RunResult, Summary, LAMBDA0_GRID, LABEL_RATES,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] glnn_core::GlnnError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset {dataset} not found (tried {})", display_paths(.tried))]
    MissingData { dataset: String, tried: Vec<PathBuf> },
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, HarnessError>;
