//! Named experiments over `bergman-core`, their reports and the verification suites.

pub mod config;
pub mod experiments;
pub mod report;
pub mod suite;

pub use config::{CliError, Experiment, ExperimentConfig, Format, Level};
pub use experiments::run;
pub use report::{emit, ExperimentReport, Quantity};
