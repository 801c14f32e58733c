//! Scenario-driven front end for the `rr-core` engine: TOML scenario
//! documents, run dispatch, and reproducible CSV/JSON artifacts with a
//! hashed manifest.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod run;
pub mod scenario;

use std::path::Path;

pub use error::{CliError, FieldError};
pub use run::{execute, run, Artifact, Manifest, RunOptions};
pub use scenario::{parse_scenario, parse_scenario_with_seed, Mode, Scenario};

/// Read and validate a scenario file, optionally overriding its seed.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario_with_seed(&text, seed)
}
