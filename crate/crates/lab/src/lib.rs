//! Experiment runner for `maxreg-core`: reads a `key = value` config, runs
//! named suites, writes `<experiment>.csv` with a `<experiment>.meta` sidecar
//! and prints one summary line per check.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use config::{Config, ConfigError};
use experiments::{ExperimentError, EXPERIMENTS};
use report::Outcome;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_UNKNOWN_EXPERIMENT: i32 = 5;
pub const EXIT_OUTPUT: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("unknown experiment {0:?}; expected one of: {list}, all", list = EXPERIMENTS.join(", "))]
    UnknownExperiment(String),
    #[error("numerical failure in {experiment}: {source}")]
    Numerical { experiment: String, source: ExperimentError },
    #[error("cannot write to {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::UnknownExperiment(_) => EXIT_UNKNOWN_EXPERIMENT,
            RunError::Numerical { .. } => EXIT_NUMERICAL,
            RunError::Output { .. } => EXIT_OUTPUT,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub experiment: Option<String>,
}

pub fn resolve(config_path: &Path, overrides: &Overrides) -> Result<Config, RunError> {
    let mut cfg = Config::load(config_path)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(e) = &overrides.experiment {
        cfg.experiment = e.clone();
    }
    if let Some(o) = &overrides.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn selected(cfg: &Config) -> Result<Vec<&'static str>, RunError> {
    if cfg.experiment == "all" {
        return Ok(EXPERIMENTS.to_vec());
    }
    EXPERIMENTS
        .iter()
        .find(|e| **e == cfg.experiment)
        .map(|e| vec![*e])
        .ok_or_else(|| RunError::UnknownExperiment(cfg.experiment.clone()))
}

fn output_dir(cfg: &Config) -> Result<PathBuf, RunError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let fail = |e: std::io::Error| RunError::Output { path: dir.clone(), reason: e.to_string() };
    std::fs::create_dir_all(&dir).map_err(fail)?;
    // probe once so an unwritable directory fails before any work is done
    let probe = dir.join(".maxreg-lab-probe");
    std::fs::write(&probe, b"").map_err(fail)?;
    let _ = std::fs::remove_file(&probe);
    Ok(dir)
}

/// Runs every selected experiment, writing outputs and summary lines to `log`.
pub fn run(cfg: &Config, log: &mut impl Write) -> Result<Vec<Outcome>, RunError> {
    let names = selected(cfg)?;
    let dir = output_dir(cfg)?;
    let mut outcomes = Vec::with_capacity(names.len());
    for name in names {
        let outcome = experiments::run(name, cfg).map_err(|source| RunError::Numerical {
            experiment: name.to_string(),
            source,
        })?;
        outcome
            .write(&dir, cfg)
            .map_err(|e| RunError::Output { path: dir.clone(), reason: e.to_string() })?;
        let _ = write!(log, "{}", outcome.summary());
        let _ = writeln!(log, "{name}: {:.2} s", outcome.elapsed_seconds);
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Exit status for a finished run: 0 when every check passed.
pub fn exit_status(outcomes: &[Outcome]) -> i32 {
    if outcomes.iter().all(Outcome::passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
