//! Experiment runner behind the `npe` command line: configuration, seeded
//! training, evaluation, sweeps, the theory table, and gradient checks.

pub mod config;
pub mod dump;
pub mod experiment;
pub mod grad_check;
pub mod metrics;
pub mod report;
pub mod theory_check;
pub mod train;

pub use config::{parse_config, parse_config_str, DatasetKind, ExperimentConfig, Method, Preset};
pub use dump::{format_model, load_model, parse_model, save_model, ModelDump};
pub use experiment::{evaluate_methods, groups_for, run_experiment, run_rows, sweep, sweep_csv, MethodReports, RunResult, SweepAxes};
pub use grad_check::{grad_check, GradCheckConfig, GradCheckReport, InstanceCheck, GRAD_TOLERANCE};
pub use metrics::{evaluate, mode_logits, predict, score, EvalMode, MetricsReport};
pub use report::{aggregate, mean_std, to_csv, MetricsRow, NA};
pub use theory_check::{
    class_mean_eta, format_trained_eta, read_trained_eta, theory_check, theory_csv, theory_rows, TheoryRow,
};
pub use train::{build_datasets, run_training, train_model, Datasets, EpochLoss, TrainOutcome};
