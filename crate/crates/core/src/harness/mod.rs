//! Experiment configuration, the end-to-end pipeline, sweeps and reports.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod sweep;

pub use config::{DataSource, RunConfig, SynthSpec};
pub use pipeline::{prepare_dataset, run_on_dataset, run_pipeline, Dataset, TrialState};
pub use report::{write_report, Arm, ExperimentReport, TrialRecord, TrialStatus};
