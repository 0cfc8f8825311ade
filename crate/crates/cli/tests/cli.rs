use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fsopoint(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsopoint"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error report is JSON")
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn characterize_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(dir.path(), &["characterize"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(dir.path().join("characterize.json"));
    assert_eq!(r["schema_version"], 1);
    let s2 = r["estimate"]["sigma2"].as_f64().unwrap();
    assert!((s2 / 0.038 - 1.0).abs() < 0.1);
    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,centre,count,density,model_density"));
    let traj = fs::read_to_string(dir.path().join("channel_trajectory.csv")).unwrap();
    assert!(traj.starts_with("k,t,x_p,theta,u_p,w_p\n"));
}

#[test]
fn characterize_stronger_scintillation_is_still_weak() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(
        dir.path(),
        &["--sigma2", "0.0576", "characterize", "--steps", "200000"],
    );
    assert!(matches!(o.status.code(), Some(0) | Some(4)));
    let r = json(dir.path().join("characterize.json"));
    assert_eq!(r["weak_turbulence"], true);
    assert_eq!(r["config"]["channel"]["sigma2"], 0.0576);
}

#[test]
fn invalid_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[channel]\nsigma = 0.04\n").unwrap();
    let o = fsopoint(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "characterize"],
    );
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["kind"], "validation");
    assert!(e["error"].as_str().unwrap().contains("sigma"));
    let o = fsopoint(dir.path(), &["--preset", "nope", "metrics"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synthesize_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(dir.path(), &["synthesize", "--paper-variants"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(dir.path().join("synthesis.json"));
    let eps = r["eps_star"].as_f64().unwrap();
    assert!(r["gain_freq"]["gain"].as_f64().unwrap() <= eps);
    assert_eq!(r["passed"], true);
    assert_eq!(r["plant_hash"].as_str().unwrap().len(), 64);
    let printed = json(dir.path().join("synthesis_printed.json"));
    assert_eq!(printed["variant"], "printed");
    assert_eq!(printed["block_sizes"][1], 1);

    let gain = dir.path().join("synthesis.json");
    let o = fsopoint(dir.path(), &["simulate", "--gain", gain.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(dir.path().join("simulate.json"));
    assert!(s["stats"]["reduction"].as_f64().unwrap() >= 0.3);
    assert_eq!(s["dissipation"]["violations"], 0);
    assert_eq!(s["gain_file_plant_hash_matches"], true);
    let t = fs::read_to_string(dir.path().join("trajectory_closed.csv")).unwrap();
    assert!(t.starts_with("k,t,x_p,x_l,u,y\n"));
}

#[test]
fn tiny_eps_cap_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(dir.path(), &["synthesize", "--eps-cap", "1e-4"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["kind"], "infeasible");
    assert!(json(dir.path().join("synthesis.json"))["error"].is_string());
}

#[test]
fn zero_gain_has_no_effect() {
    let dir = tempfile::tempdir().unwrap();
    let gain = dir.path().join("zero.json");
    fs::write(&gain, r#"{"k": [0.0, 0.0]}"#).unwrap();
    let o = fsopoint(
        dir.path(),
        &[
            "simulate",
            "--gain",
            gain.to_str().unwrap(),
            "--steps",
            "2000",
        ],
    );
    // the thresholds cannot be met without control
    assert_eq!(o.status.code(), Some(4));
    let s = json(dir.path().join("simulate.json"));
    assert_eq!(s["stats"]["reduction"], 0.0);
    assert!(s["dissipation"].is_null());
}

#[test]
fn missing_gain_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(
        dir.path(),
        &["simulate", "--gain", "/nonexistent/gain.json"],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = fsopoint(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_curves_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(dir.path(), &["metrics"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(dir.path().join("metrics.json"));
    let curves = r["curves"].as_array().unwrap();
    let count = |metric: &str, method: &str| {
        curves
            .iter()
            .filter(|c| c["metric"] == metric && c["method"] == method)
            .count()
    };
    assert_eq!(count("outage", "closed-form"), 2);
    assert_eq!(count("ber", "quadrature"), 2);
    assert_eq!(r["outage_ordered"], true);
    assert_eq!(r["ber_ordered"], true);
    let gap = r["margin_gap_db"].as_f64().unwrap();
    assert!((gap - 1.0).abs() <= 0.2);
    let csv = fs::read_to_string(dir.path().join("outage.csv")).unwrap();
    assert!(csv.starts_with("axis_db,value,method,sigma2"));
}

#[test]
fn metrics_monte_carlo_within_bands() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsopoint(dir.path(), &["metrics", "--method", "monte-carlo"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(dir.path().join("metrics.json"));
    assert!(r["monte_carlo_coverage"].as_f64().unwrap() >= 0.95);
    let ber = fs::read_to_string(dir.path().join("ber.csv")).unwrap();
    assert!(ber.lines().any(|l| l.contains(",monte-carlo,")));
}

#[test]
fn empty_sweep_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[metrics]\nmargin_db = { start = 3.0, stop = 1.0, step = 0.5 }\n",
    )
    .unwrap();
    let o = fsopoint(dir.path(), &["--config", cfg.to_str().unwrap(), "metrics"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("gain.json");
    fs::write(&zero, r#"{"k": [0.5, -0.01]}"#).unwrap();
    let runs: [&[&str]; 3] = [
        &["characterize", "--steps", "100000"],
        &[
            "simulate",
            "--gain",
            zero.to_str().unwrap(),
            "--steps",
            "2000",
        ],
        &["metrics"],
    ];
    let out = dir.path().join("out");
    for args in runs {
        fsopoint(&out, args);
    }
    let first = snapshot(&out);
    for args in runs {
        fsopoint(&out, args);
    }
    assert_eq!(first, snapshot(&out));
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    assert_eq!(
        fsopoint(&out, &["--seed", "9", "metrics", "--sigma2-closed", "0.02"])
            .status
            .code(),
        Some(0)
    );
    let echo = out.join("metrics.config.toml");
    let copy = dir.path().join("echo.toml");
    fs::copy(&echo, &copy).unwrap();
    let before = fs::read(out.join("metrics.json")).unwrap();
    fs::remove_dir_all(&out).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fsopoint"))
        .args(["--config", copy.to_str().unwrap(), "metrics"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(before, fs::read(out.join("metrics.json")).unwrap());
}

#[test]
fn show_config_prints_the_preset() {
    let o = Command::new(env!("CARGO_BIN_EXE_fsopoint"))
        .arg("show-config")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sigma2 = 0.038"));
}
