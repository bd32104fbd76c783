//! Configuration, random search and the 5-fold harness behind the CLI.

mod commands;
mod config;
mod run;

pub use commands::{cmd_evaluate, cmd_explain, cmd_preprocess, cmd_report, Evaluation};
pub use config::{preset, ExperimentConfig, SearchSpace};
pub use run::{
    cmd_run, fold_dir, prepare, run_fold, trial_config, write_fold_report, Aggregate, ArtifactIds, FoldRecord,
    FoldResult, MeanStd, RunManifest, SplitSizes, CAVEAT, MODELS,
};
