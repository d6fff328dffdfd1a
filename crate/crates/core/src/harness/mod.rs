//! Experiment engine: configuration, simulation, metrics and output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{parse_pairs, BoundKind, DetectorKind, ExperimentConfig, MetricKind, Scenario};
pub use metrics::{compute_metrics, Indicator, MetricRecord};
pub use output::{csv_string, sidecar_json, write_csv};
pub use presets::preset;
pub use run::{run_all, run_experiment, Setup, Trial};
