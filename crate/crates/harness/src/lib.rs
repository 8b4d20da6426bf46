//! Monte-Carlo experiment runner for DiHaT and GreeDi-LMS: configuration,
//! presets, trace aggregation, output files and theory checks.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{compare_variants, run_experiment, run_experiment_detailed, Comparison, MsdTrace};
pub use output::emit_outputs;
pub use verify::{verify_theory, TheoryReport, TheoryScenario};
