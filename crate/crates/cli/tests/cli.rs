use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_submod-swarm"));
    c.env_remove("SUBMOD_SWARM_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV file, skipping the comment and header lines.
fn rows(file: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(file).unwrap();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn coverage_run_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["coverage", "--agents", "50", "--trials", "50", "--solver", "rsp:4", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&out.join("results.csv")).len(), 50);
    assert_eq!(rows(&out.join("bounds.csv")).len(), 50);
    assert_eq!(rows(&out.join("messages.csv")).len(), 50);
    for f in ["results.csv", "bounds.csv", "messages.csv"] {
        let first = std::fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("# seed=1 version="), "{f}: {first}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["version"].is_string());

    // the aggregate is recomputable from the rows
    let objs: Vec<f64> = rows(&out.join("results.csv")).iter().map(|r| r[5].parse().unwrap()).collect();
    let mean = objs.iter().sum::<f64>() / objs.len() as f64;
    let summary = &manifest["summary"][0];
    assert_eq!(summary["trials"], 50);
    assert!((summary["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
}

#[test]
fn rerunning_a_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&["probsense", "--agents", "12", "--trials", "3", "--solver", "myopic,rsp:global:0.05,sequential", "--out", path(&a)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = a.join("manifest.json");
    let o = run(&["probsense", "--config", path(&manifest), "--jobs", "1", "--out", path(&b)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "bounds.csv", "messages.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn floats_round_trip_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&run(&["coverage", "--agents", "6", "--trials", "2", "--out", path(&out)])), 0);
    for r in rows(&out.join("results.csv")) {
        let mantissa = r[5].split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{}", r[5]);
    }
}

#[test]
fn seed_flag_file_and_environment_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env");
    let o = bin()
        .args(["coverage", "--agents", "5", "--trials", "1", "--out", path(&out)])
        .env("SUBMOD_SWARM_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family": "coverage", "n_agents": 5, "trials": 1, "seed": 7}"#).unwrap();
    let out = dir.path().join("file");
    let o = bin()
        .args(["coverage", "--config", path(&cfg), "--out", path(&out)])
        .env("SUBMOD_SWARM_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn auctions_on_a_disconnected_graph_do_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "coverage", "--agents", "10", "--trials", "2", "--solver", "auction:global", "--comm-range", "1e-6", "--out", path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("results.csv"));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[7] == "false"));
    // no message accounting without a connected graph
    assert!(rows(&out.join("messages.csv")).is_empty());
}

#[test]
fn compare_reports_paired_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, rsp) = (dir.path().join("seq"), dir.path().join("rsp"));
    for (solver, out) in [("sequential", &seq), ("rsp:8", &rsp)] {
        let o = run(&["coverage", "--agents", "20", "--trials", "8", "--solver", solver, "--no-bounds", "--out", path(out)]);
        assert_eq!(code(&o), 0);
    }
    let o = run(&["compare", path(&seq), path(&seq)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let deltas: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(deltas.len(), 8);
    assert!(deltas.iter().all(|&d| d == 0.0));

    let table = dir.path().join("cmp.csv");
    let o = run(&["compare", path(&seq), path(&rsp), "--out", path(&table)]);
    assert_eq!(code(&o), 0);
    let body = rows(&table);
    let mean: f64 = body.iter().map(|r| r[6].parse::<f64>().unwrap()).sum::<f64>() / body.len() as f64;
    assert!(mean > 0.0);
    for r in &body {
        let (base, obj, ratio): (f64, f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap(), r[7].parse().unwrap());
        assert_eq!(ratio, obj / base);
    }
}

#[test]
fn compare_refuses_mismatched_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run(&["coverage", "--agents", "5", "--trials", "2", "--seed", "1", "--out", path(&a)])), 0);
    assert_eq!(code(&run(&["coverage", "--agents", "5", "--trials", "2", "--seed", "2", "--out", path(&b)])), 0);
    let o = run(&["compare", path(&a), path(&b)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed mismatch"));
}

#[test]
fn invalid_input_and_enumeration_limits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&run(&["coverage", "--solver", "rsp", "--out", path(&out)])), 2);
    assert_eq!(code(&run(&["track", "--solver", "auction:local", "--out", path(&out)])), 2);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"family": "coverage", "agents": 3}"#).unwrap();
    assert_eq!(code(&run(&["coverage", "--config", path(&cfg), "--out", path(&out)])), 2);
    assert_eq!(code(&run(&["probsense", "--config", path(&cfg), "--out", path(&out)])), 2);
    let o = run(&["coverage", "--agents", "30", "--trials", "1", "--exact", "--out", path(&out)]);
    assert_eq!(code(&o), 3);
    let o = run(&["coverage", "--agents", "3", "--trials", "2", "--exact", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    assert!(rows(&out.join("results.csv")).iter().all(|r| !r[9].is_empty()));
}

#[test]
fn tinycheck_exit_code_counts_failures() {
    let o = run(&["tinycheck", "--cases", "40"]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with("PASS")));
    let o = run(&["tinycheck", "--cases", "40", "--mutant"]);
    let table = String::from_utf8(o.stdout.clone()).unwrap();
    let failed = table.lines().filter(|l| l.ends_with("FAIL")).count();
    assert!(failed >= 1);
    assert_eq!(code(&o), failed as i32);
    assert!(table.lines().any(|l| l.starts_with("coverage is submodular") && l.ends_with("FAIL")));
}

#[test]
fn tracking_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("track");
    let cfg = dir.path().join("track.json");
    std::fs::write(
        &cfg,
        r#"{"family": "track", "n_agents": 3, "trials": 1, "solver": ["myopic", "rsp:2"],
            "overrides": {"trial_length": 5, "burn_in": 1, "n_samples": 4}}"#,
    )
    .unwrap();
    let o = run(&["track", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("results.csv"));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[5].parse::<f64>().unwrap().is_finite() && !row[10].is_empty()));
    let steps = rows(&out.join("steps.csv"));
    assert_eq!(steps.len(), 2 * 5);
    assert_eq!(steps[0][..4], ["0", "1", "myopic", "3"]);
}
