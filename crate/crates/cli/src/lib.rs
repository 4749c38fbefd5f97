//! Scenario runner behind the `panopt` binary.
//!
//! A scenario is one JSON document:
//!
//! ```json
//! {"kind": "margin", "seed": 0, "output": {"path": "out", "format": "csv"},
//!  "params": {"model": "cboe", "premium": 1.5, "spot": 50, "strike": 49, "is_put": true}}
//! ```
//!
//! Exit codes: 1 for config errors, 2 for domain errors, 3 for io errors.

pub mod config;
pub mod scenarios;

use std::path::{Path, PathBuf};

pub use config::{CliError, Format, Kind, OutputSpec, Scenario};
pub use scenarios::{Artifact, Context};

/// Command-line overrides of a scenario document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads, runs and writes one scenario; returns the written files.
pub fn run_scenario(kind: Kind, config_path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let scenario = Scenario::load(config_path)?;
    if scenario.kind != kind {
        return Err(CliError::Config(format!(
            "at `kind`: config is `{}` but `{kind}` was requested",
            scenario.kind
        )));
    }
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| scenario.output.path.clone())
        .unwrap_or_else(|| PathBuf::from("panopt-out"));
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let ctx = Context {
        seed: overrides.seed.unwrap_or(scenario.seed),
        format: scenario.output.format,
        base_dir,
    };
    let artifacts = scenarios::run(scenario, &ctx)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = out_dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
