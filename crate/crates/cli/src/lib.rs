//! Batch front end: configuration, the staged validation pipeline, report
//! assembly, randomized forms and SVG plots.

pub mod config;
pub mod forms;
pub mod output;
pub mod pipeline;
pub mod plots;
pub mod report;

pub use config::{ConfigError, PipelineConfig, RegressionConfig, Thresholds};
pub use pipeline::{analyze, run_pipeline, write_outputs, Inputs, PipelineError};
pub use report::{evaluate_criteria, CriterionVerdict, ValidationReport};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CRITERIA_FAILED: i32 = 10;
    pub const ERROR: i32 = 20;
    pub const USAGE: i32 = 21;
}
