use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn phasecal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasecal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn crlb_defaults_report_phase_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("crlb");
    let o = phasecal(&["crlb", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("crlb.json")).unwrap()).unwrap();
    let phase = report["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["param"] == "phase_offset_ab")
        .unwrap();
    let deg = phase["std_deg"].as_f64().unwrap();
    assert!((deg - 2.6755).abs() / 2.6755 < 5e-3, "{deg}");
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn sweep_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        r#"{"sweep": {"bandwidths_mhz": [6, 12], "trials": 3, "base_seed": 11}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = phasecal(&["sweep", "--config", &cfg, "--out", dir.to_str().unwrap(), "--threads", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("sweep.csv")).unwrap());
    let header = String::from_utf8_lossy(&csv_a).lines().next().unwrap().to_string();
    assert_eq!(header, "W_hz,param,rmse,crlb_std,unit,trials,degenerate_count");

    // the manifest alone reproduces the output
    let c = tmp.path().join("c");
    let manifest = a.join("run_manifest.json");
    let o = phasecal(&["sweep", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_a, fs::read(c.join("sweep.csv")).unwrap());
}

#[test]
fn estimate_rejects_mismatched_subcarrier_count() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let cfg12 = write_config(tmp.path(), "w12.json", r#"{"ofdm": {"bandwidth_mhz": 12}}"#);
    let cfg24 = write_config(tmp.path(), "w24.json", r#"{"ofdm": {"bandwidth_mhz": 24}}"#);
    let o = phasecal(&["simulate", "--config", &cfg12, "--out", sim.to_str().unwrap(), "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let obs = sim.join("observation.json");

    let ok = phasecal(&["estimate", "--config", &cfg12, "--obs", obs.to_str().unwrap(), "--out", tmp.path().join("e1").to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let est: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("e1/estimate.json")).unwrap()).unwrap();
    assert!(est["params"]["entries"].as_array().unwrap().len() >= 2);

    let bad = phasecal(&["estimate", "--config", &cfg24, "--obs", obs.to_str().unwrap(), "--out", tmp.path().join("e2").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"offsets": {"clock_offset_ab": 1}}"#,
        r#"{"scenario": "scenario2_unknown_pos", "direction": "uni_ab"}"#,
        r#"{"unknown_key_s": 1}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.json"), text);
        let o = phasecal(&["crlb", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("config error at"));
    }
}

#[test]
fn profile_writes_two_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.json",
        r#"{"noiseless": true, "ofdm": {"bandwidth_mhz": 12},
            "profile": {"param": "clock_offset_ab", "range_ns": [-2, 2], "points": 41}}"#,
    );
    let out = tmp.path().join("p");
    let o = phasecal(&["profile", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("profile.csv")).unwrap();
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows.len(), 42);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
    assert!(out.join("run_manifest.json").exists());
}
