//! CSV tables, metadata sidecars and check summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::checks::Check;
use crate::config::Config;

/// Fixed-column table rendered as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Row helper for the common `quantity, n, re, im, value` layout.
pub fn quantity_row(quantity: &str, n: usize, point: Complex64, value: f64) -> Vec<String> {
    vec![quantity.to_string(), n.to_string(), num(point.re), num(point.im), num(value)]
}

pub const QUANTITY_HEADER: &[&str] = &["quantity", "n", "re", "im", "value"];

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: &'static str,
    pub table: Table,
    pub checks: Vec<Check>,
    pub elapsed_seconds: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        self.checks.iter().map(|c| c.summary_line() + "\n").collect()
    }

    fn meta(&self, cfg: &Config) -> String {
        let mut s = String::new();
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "n = {}", cfg.n);
        let _ = writeln!(s, "m = {}", cfg.m);
        let _ = writeln!(s, "T = {}", cfg.horizon);
        let _ = writeln!(s, "p = {}", cfg.p);
        let grids: Vec<String> = cfg.grids.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(s, "grids = {}", grids.join(","));
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "created_unix = {stamp}");
        let _ = writeln!(s, "elapsed_seconds = {:.3}", self.elapsed_seconds);
        for c in &self.checks {
            let _ = writeln!(s, "check = {}", c.summary_line());
        }
        s
    }

    /// Writes `<experiment>.csv` and `<experiment>.meta` into `dir`.
    pub fn write(&self, dir: &Path, cfg: &Config) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.experiment));
        let meta = dir.join(format!("{}.meta", self.experiment));
        std::fs::write(&csv, self.table.to_csv())?;
        std::fs::write(&meta, self.meta(cfg))?;
        Ok((csv, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x".into(), num(0.1)]);
        assert_eq!(t.to_csv(), "a,b\nx,1.0000000000000001e-1\n");
    }
}
