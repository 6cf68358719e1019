use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn ebm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebm")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ebm-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn audit_exits_zero() {
    let dir = scratch("audit");
    let out = ebm(&["audit", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("1.11803"));
    assert!(text.contains("0.858581"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sample_is_seeded_csv() {
    let args = ["sample", "--scheme", "ss", "--dim", "2", "--epochs", "3", "--grid", "8", "--seed", "4"];
    let (a, b) = (ebm(&args), ebm(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    // Header plus 3 epochs of 8 cells and the endpoint.
    assert_eq!(rows.len(), 1 + 3 * 8 + 1);
    assert_eq!(rows[1].split(',').count(), 3);
    let other = ebm(&["sample", "--scheme", "ss", "--dim", "2", "--epochs", "3", "--grid", "8", "--seed", "5"]);
    assert_ne!(text.as_bytes(), other.stdout.as_slice());
}

#[test]
fn sgdo_writes_trajectory() {
    let dir = scratch("sgdo");
    fs::create_dir_all(&dir).unwrap();
    let file = dir.join("run.csv");
    let out = ebm(&["sgdo", "--samples", "20", "--epochs", "50", "--seed", "1", "--out", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&file).unwrap();
    assert!(text.lines().any(|l| l.contains("error")));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn experiment_smoke_writes_reports() {
    let dir = scratch("smoke");
    let config = configs().join("smoke.toml");
    let out = ebm(&["experiment", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("smoke.csv").exists());
    assert!(dir.join("smoke.json").exists());
    let svg = ebm(&["experiment", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--format", "svg"]);
    assert_eq!(svg.status.code(), out.status.code());
    assert!(dir.join("smoke.svg").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn failed_assertion_exits_one() {
    // No fitted slope matches -beta exactly, so a zero tolerance must fail.
    let dir = scratch("strict");
    fs::create_dir_all(&dir).unwrap();
    let strict = fs::read_to_string(configs().join("smoke.toml"))
        .unwrap()
        .replace("slope_tolerance = 0.3", "slope_tolerance = 0.0")
        .replace("pass_fraction = 0.5", "pass_fraction = 1.0");
    let config = dir.join("strict.toml");
    fs::write(&config, strict).unwrap();
    let out = ebm(&["experiment", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn bad_config_is_an_error() {
    let dir = scratch("bad");
    fs::create_dir_all(&dir).unwrap();
    let config = dir.join("bad.toml");
    fs::write(&config, "name = \"bad\"\nkind = \"convergence\"\nbogus = 1\n").unwrap();
    let out = ebm(&["experiment", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let missing = ebm(&["experiment", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}
