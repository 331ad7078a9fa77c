use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn relaycap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaycap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn unity(relays: usize, noise: f64) -> String {
    let ones = vec!["1.0"; relays].join(", ");
    format!(
        r#"{{"source_power": 1.0, "relay_powers": [{ones}], "noise_power": {noise},
            "gain_sd": 1.0, "gains_sr": [{ones}], "gains_rd": [{ones}]}}"#
    )
}

#[test]
fn rate_without_relays_is_the_direct_link() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "r0.json", &unity(0, 1.0));
    let out = relaycap(&["rate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["direct"].as_f64(), Some(0.5));
    assert_eq!(v["cutset"].as_f64(), Some(0.5));
}

#[test]
fn rate_single_unity_relay() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "r1.json", &unity(1, 1.0));
    let out = relaycap(&["rate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let cutset = v["cutset"].as_f64().unwrap();
    assert!((cutset - 0.5 * 3f64.log2()).abs() < 1e-12);
    assert!((v["af"].as_f64().unwrap() - 0.7785970).abs() < 1e-7);
    assert!((v["mrc"].as_f64().unwrap() - 0.5 * 2.5f64.log2()).abs() < 1e-12);
}

#[test]
fn rate_csv_and_out_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "r1.json", &unity(1, 1.0));
    let dest = dir.path().join("summary.csv");
    let out = relaycap(&["rate", "--config", arg(&cfg), "--format", "csv", "--out", arg(&dest)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(dest).unwrap();
    assert!(text.starts_with("relays,direct,cutset"));
}

#[test]
fn rate_accepts_geometry_documents() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "geo.json",
        r#"{"geometry": {"source_pos": [0, 0], "dest_pos": [1, 0], "relay_positions": [[0.5, 0.1]]},
            "source_power": 0.1, "relay_powers": [0.1], "noise_power": 1e-6}"#,
    );
    let out = relaycap(&["rate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // 1 m direct link: g = 1, snr = 1e5.
    assert!((v["direct"].as_f64().unwrap() - 0.5 * (1.0f64 + 1e5).log2()).abs() < 1e-12);
}

#[test]
fn negative_noise_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", &unity(1, -1.0));
    let out = relaycap(&["rate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise_power"));
}

#[test]
fn malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "broken.json", "{\n  \"source_power\": 1.0,\n  oops\n}");
    let out = relaycap(&["rate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = relaycap(&["rate", "--config", "/nonexistent/net.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_flag_is_rejected() {
    let out = relaycap(&["rate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(relaycap(&["--help"]).status.code(), Some(0));
}

#[test]
fn svg_is_only_for_sweeps() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "r1.json", &unity(1, 1.0));
    let out = relaycap(&["rate", "--config", arg(&cfg), "--format", "svg"]);
    assert_eq!(out.status.code(), Some(1));
}

fn small_sweep(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "sweep.json",
        r#"{"d_sd": 1.0, "d_r": 0.1, "start": 0.0, "stop": 1.0, "step": 0.25,
            "source_power": 0.1, "relay_power": 0.1, "noise_power": 1e-6}"#,
    )
}

#[test]
fn sweep_csv_has_one_row_per_position() {
    let dir = TempDir::new().unwrap();
    let cfg = small_sweep(&dir);
    let out = relaycap(&["sweep", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d_sr,direct,cutset,rho_star,binding_cut,af,mrc,parallel");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn sweep_svg_and_relay_comparison() {
    let dir = TempDir::new().unwrap();
    let cfg = small_sweep(&dir);
    let svg = relaycap(&["sweep", "--config", arg(&cfg), "--format", "svg"]);
    assert_eq!(svg.status.code(), Some(0));
    let svg = String::from_utf8(svg.stdout).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let cmp = relaycap(&["sweep", "--config", arg(&cfg), "--relays", "1,2"]);
    assert_eq!(cmp.status.code(), Some(0));
    let text = String::from_utf8(cmp.stdout).unwrap();
    assert!(text.starts_with('#'));
    assert!(text.lines().nth(1).unwrap().ends_with("ratio"));

    let bad = relaycap(&["sweep", "--config", arg(&cfg), "--relays", "1,2", "--format", "svg"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn verify_zero_trials_passes() {
    let out = relaycap(&["verify", "--suite", "cut-reduction", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["pass"], Value::Bool(true));
}

#[test]
fn verify_cut_reduction_passes() {
    let out = relaycap(&["verify", "--suite", "cut-reduction", "--seed", "5", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["trials"].as_u64(), Some(10));
    assert_eq!(v["failures"].as_u64(), Some(0));
}

#[test]
fn verify_failure_exits_two() {
    // Full relay correlation does not maximize the min-cut for every network,
    // so this suite finds counterexamples.
    let out = relaycap(&["verify", "--suite", "full-correlation", "--seed", "1", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["pass"], Value::Bool(false));
}

#[test]
fn verify_unknown_suite() {
    let out = relaycap(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "sim.json",
        &format!(
            r#"{{"network": {}, "num_blocks": 50, "samples_per_block": 200,
                "mode": {{"kind": "correlated", "rho": 0.5}}}}"#,
            unity(2, 1.0)
        ),
    );
    let a = relaycap(&["simulate", "--config", arg(&cfg), "--seed", "9"]);
    let b = relaycap(&["simulate", "--config", arg(&cfg), "--seed", "9"]);
    let c = relaycap(&["simulate", "--config", arg(&cfg), "--seed", "10"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["seed"].as_u64(), Some(9));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == Value::Bool(true)));
}

#[test]
fn simulate_rejects_excess_gain() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "sim.json",
        &format!(
            r#"{{"network": {}, "num_blocks": 10, "samples_per_block": 10,
                "mode": {{"kind": "amplify_forward", "beta": [5.0]}}}}"#,
            unity(1, 1.0)
        ),
    );
    let out = relaycap(&["simulate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_output_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "odd.json",
        r#"{"source_power": 0.3, "relay_powers": [0.7, 0.11], "noise_power": 0.013,
            "gain_sd": 0.017, "gains_sr": [3.3, 0.9], "gains_rd": [0.21, 1.7]}"#,
    );
    let first = relaycap(&["rate", "--config", arg(&cfg)]);
    let v = stdout_json(&first);
    let again: Value = serde_json::from_str(&v.to_string()).unwrap();
    assert_eq!(v, again);
    let cutset = v["cutset"].as_f64().unwrap();
    assert_eq!(cutset.to_string().parse::<f64>().unwrap(), cutset);
}
