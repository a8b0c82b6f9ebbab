//! Configuration, orchestration and serialization for the `mfkg` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentKind, RunConfig};
pub use error::{CliError, Result};
pub use output::{Manifest, ManifestEntry, OutputDir};
pub use run::{read_trajectory, run_experiment, RunReport};
