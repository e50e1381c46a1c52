use std::process::Command;

use serde_json::Value;

fn asymde(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_asymde"))
        .args(args)
        .env("ASYMDE_THREADS", "1")
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = asymde(&["threshold", "--code", "3,6", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_code_is_usage_error() {
    let out = asymde(&["threshold", "--code", "no-such-code", "--family", "bsc"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_bracket_is_numeric_error() {
    let out = asymde(&["threshold", "--code", "3,6", "--family", "bsc", "--lo", "0.2", "--hi", "0.3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bsc_threshold_json_with_manifest() {
    let out = asymde(&["threshold", "--code", "3,6", "--family", "bsc", "--precision", "1e-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = v["threshold"].as_f64().unwrap();
    assert!((t - 0.0837).abs() < 2e-3, "threshold {t}");
    assert_eq!(v["manifest"]["subcommand"], "threshold");
    assert_eq!(v["manifest"]["code_hash"][0][1].as_str().unwrap().len(), 64);
}

#[test]
fn de_csv_and_sidecar_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = asymde(&[
        "de",
        "--code",
        "3,6",
        "--channel",
        "z:eps1=0.15",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("l,p_e,cbp"));
    let pe: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(pe.len() >= 2 && pe.last() < pe.first());
    let side = std::fs::read_to_string(dir.path().join("trace.csv.manifest.json")).unwrap();
    let m: Value = serde_json::from_str(&side).unwrap();
    assert_eq!(m["subcommand"], "de");
}

#[test]
fn degree_file_round_trips_through_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("code.deg");
    std::fs::write(&path, "# (3,6)\nlambda 3 1\nrho 6 1\n").unwrap();
    let from_file = asymde(&["threshold", "--code", path.to_str().unwrap(), "--family", "bec", "--precision", "1e-3"]);
    let preset = asymde(&["threshold", "--code", "3,6", "--family", "bec", "--precision", "1e-3"]);
    let a: Value = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: Value = serde_json::from_slice(&preset.stdout).unwrap();
    assert_eq!(a["threshold"], b["threshold"]);
}
