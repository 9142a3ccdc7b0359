//! Line-based `key = value` configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::checks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Settings for one run. Every field has a default, so an empty file is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub experiment: String,
    /// Grid cells for single-grid experiments.
    pub n: usize,
    /// Time steps.
    pub m: usize,
    pub horizon: f64,
    pub p: f64,
    pub seed: u64,
    /// Grids for refinement sweeps.
    pub grids: Vec<usize>,
    /// Fine grids for the Dirichlet growth fit.
    pub kappa_grids: Vec<usize>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    /// Half-plane samples: radii and angles per radius.
    pub radii: usize,
    pub angles: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Frequencies of the R-bound families.
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
    pub rbound_trials: usize,
    pub rbound_subset: usize,
    /// Forcings tried when `p != 2`.
    pub search_trials: usize,
    pub perturb_b: f64,
    pub perturb_c: f64,
    pub nonauto_a0: f64,
    pub nonauto_slope: f64,
    pub continuity_pairs: usize,
    pub out: Option<PathBuf>,
    /// Threshold overrides keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            experiment: "all".into(),
            n: 128,
            m: 256,
            horizon: 1.0,
            p: 2.0,
            seed: 42,
            grids: vec![32, 64, 128],
            kappa_grids: vec![16384, 32768],
            lambda_min: 10.0,
            lambda_max: 1e6,
            lambda_count: 25,
            radii: 20,
            angles: 11,
            r_min: 1e-2,
            r_max: 1e6,
            s_min: 1e-2,
            s_max: 1e4,
            s_count: 40,
            rbound_trials: 100,
            rbound_subset: 8,
            search_trials: 200,
            perturb_b: 0.5,
            perturb_c: 1.0,
            nonauto_a0: 1.0,
            nonauto_slope: 0.5,
            continuity_pairs: 20,
            out: None,
            tolerances: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn positive<T: FromStr + PartialOrd + Default + Copy>(value: &str) -> Result<T, String> {
    let v: T = parse(value)?;
    if v > T::default() {
        Ok(v)
    } else {
        Err(format!("{value:?} must be positive"))
    }
}

fn finite_positive(value: &str) -> Result<f64, String> {
    let v: f64 = positive(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{value:?} must be finite"))
    }
}

fn list(value: &str) -> Result<Vec<usize>, String> {
    let v = value
        .split(',')
        .map(|s| positive::<usize>(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err("grid list must be increasing".into());
    }
    Ok(v)
}

fn at_least(v: usize, min: usize) -> Result<usize, String> {
    if v < min {
        Err(format!("must be at least {min}, got {v}"))
    } else {
        Ok(v)
    }
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ConfigError::Line { line: idx + 1, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let min_cells = maxreg_core::grid::MIN_CELLS;
        match key {
            "experiment" => self.experiment = value.to_string(),
            "n" => self.n = at_least(positive(value)?, 2 * min_cells)?,
            "m" => self.m = at_least(positive(value)?, 2 * maxreg_core::grid::MIN_STEPS)?,
            "T" => self.horizon = finite_positive(value)?,
            "p" => {
                let p: f64 = parse(value)?;
                if !(p >= 1.0) {
                    return Err(format!("p must be at least 1, got {value}"));
                }
                self.p = p;
            }
            "seed" => self.seed = parse(value)?,
            "grids" => {
                self.grids = list(value)?;
                at_least(self.grids[0], min_cells)?;
            }
            "kappa_grids" => {
                self.kappa_grids = list(value)?;
                if self.kappa_grids.len() < 2 {
                    return Err("need two kappa grids".into());
                }
            }
            "lambda_min" => self.lambda_min = finite_positive(value)?,
            "lambda_max" => self.lambda_max = finite_positive(value)?,
            "lambda_count" => self.lambda_count = at_least(positive(value)?, 2)?,
            "radii" => self.radii = at_least(positive(value)?, 2)?,
            "angles" => self.angles = positive(value)?,
            "r_min" => self.r_min = finite_positive(value)?,
            "r_max" => self.r_max = finite_positive(value)?,
            "s_min" => self.s_min = finite_positive(value)?,
            "s_max" => self.s_max = finite_positive(value)?,
            "s_count" => self.s_count = at_least(positive(value)?, 2)?,
            "rbound_trials" => self.rbound_trials = at_least(positive(value)?, maxreg_core::rbound::MIN_TRIALS)?,
            "rbound_subset" => self.rbound_subset = positive(value)?,
            "search_trials" => self.search_trials = at_least(positive(value)?, maxreg_core::maxreg::MIN_RANDOM_TRIALS)?,
            "perturb_b" => self.perturb_b = parse(value)?,
            "perturb_c" => self.perturb_c = parse(value)?,
            "nonauto_a0" => self.nonauto_a0 = finite_positive(value)?,
            "nonauto_slope" => self.nonauto_slope = parse(value)?,
            "continuity_pairs" => self.continuity_pairs = positive(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => match key.strip_prefix("tol.") {
                Some(name) if checks::lookup(name).is_some() => {
                    let v: f64 = parse(value)?;
                    if !v.is_finite() {
                        return Err(format!("tolerance {value:?} must be finite"));
                    }
                    self.tolerances.insert(name.to_string(), v);
                }
                Some(name) => return Err(format!("unknown check {name:?}")),
                None => return Err(format!("unknown key {key:?}")),
            },
        }
        Ok(())
    }

    /// Cross-field checks that only make sense after the whole file is read.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |reason: &str| ConfigError::Invalid(reason.to_string());
        if self.lambda_min >= self.lambda_max {
            return Err(err("lambda_min must be below lambda_max"));
        }
        if self.r_min >= self.r_max {
            return Err(err("r_min must be below r_max"));
        }
        if self.s_min >= self.s_max {
            return Err(err("s_min must be below s_max"));
        }
        if self.rbound_subset > self.s_count {
            return Err(err("rbound_subset exceeds s_count"));
        }
        if self.nonauto_a0 + self.nonauto_slope * self.horizon <= 0.0 {
            return Err(err("coefficient a0 + slope T must stay positive"));
        }
        Ok(())
    }

    /// Threshold for a check, honouring `tol.<name>` overrides.
    pub fn threshold(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .unwrap_or_else(|| checks::lookup(name).map(|c| c.default).unwrap_or(f64::NAN))
    }
}
