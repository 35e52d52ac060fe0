//! Experiment configuration, built-in scenes, the simulation loop and
//! metrics output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;
pub mod scenarios;

pub use config::ExperimentConfig;
pub use metrics::{cdf, percentile, summarize, MetricsLog, RecalMarker, Stats, StrategySummary, TrackRecord};
pub use run::{run_many, run_scenario, run_suite, strategy_overhead};
