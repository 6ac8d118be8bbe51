//! Dataset assembly, imitation metrics and experiment orchestration.

mod config;
mod data;
mod experiment;
mod metrics;

pub use config::{DeployConfig, ExperimentConfig, LossKind, Representation, SplitFractions};
pub use data::{
    collect_dataset, derive_seed, partition_sizes, rebalance, rebalance_indices, rebalance_present_indices, split,
    split_episodes, stream, worlds, Collection, RowRef,
};
pub use experiment::{
    best_validation_index, build_datasets, evaluate, n_classes, run_experiment, select_trees, simulate, train,
    write_curve_csv, CurvePoint, Datasets, ExperimentOutcome, MetricsReport, RowCounts, SelectedTree, Simulation,
    TopologyMetrics, Training, TreeSummary,
};
pub use metrics::{accuracy, mtbf, FailureStats};
