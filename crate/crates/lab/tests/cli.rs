//! End-to-end runs of the binary: exit codes and output files.

use std::path::Path;
use std::process::Command;

fn lab(config: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_maxreg-lab"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("lab.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn identities_run_writes_csv_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = identities\nn = 64 # smaller grid\n");
    let out = dir.path().join("out");
    let o = lab(&cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("[AC1] identities.resolvent"));
    assert!(stdout.lines().filter(|l| l.starts_with('[')).all(|l| l.ends_with("PASS")));
    let csv = std::fs::read_to_string(out.join("identities.csv")).unwrap();
    assert!(csv.starts_with("quantity,n,re,im,value\n"));
    let meta = std::fs::read_to_string(out.join("identities.meta")).unwrap();
    assert!(meta.contains("seed = 42") && meta.contains("n = 64"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = spectra\nseed = 3\n");
    let out = dir.path().join("out");
    let o = lab(&cfg, &["--out", out.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let meta = std::fs::read_to_string(out.join("spectra.meta")).unwrap();
    assert!(meta.contains("seed = 99"));
}

#[test]
fn kappa_slope_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kappa_grids = 4096, 8192\nlambda_max = 1e4\n");
    let out = dir.path().join("out");
    let o = lab(&cfg, &["--out", out.to_str().unwrap(), "--experiment", "kappa"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("kappa.csv")).unwrap();
    let fit = csv.lines().find(|l| l.starts_with("fit,")).unwrap();
    let slope: f64 = fit.split(',').nth(2).unwrap().parse().unwrap();
    assert!((0.20..=0.30).contains(&slope), "{slope}");
}

#[test]
fn failing_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = spectra\ntol.spectra.free_relative = 1e-12\n");
    let o = lab(&cfg, &["--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stdout).unwrap().contains("spectra.free_relative measured"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p = 2\nn = -4\n");
    let o = lab(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 2"));
    let o = lab(&dir.path().join("missing.cfg"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_experiment_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = lab(&cfg, &["--experiment", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8(o.stderr).unwrap().contains("identities"));
}

#[test]
fn unwritable_output_exits_six() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "experiment = spectra\n");
    let o = lab(&cfg, &["--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
}
