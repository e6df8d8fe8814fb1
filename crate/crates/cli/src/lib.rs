//! Configuration-driven experiment runner for the `neumann-mc` solvers.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use output::{write_outputs, CsvTable, RunOutput};
pub use run::{load_or_build_table, run_experiment};
