//! End-to-end tests against the compiled `qdiss` binary: unit parsing at the
//! config boundary, manifest provenance, determinism of seeded runs, and the
//! documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn qdiss(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdiss"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8(output.stderr.clone()).expect("utf8 stderr");
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr not JSON: {text}"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest exists");
    serde_json::from_str(&text).expect("manifest is JSON")
}

#[test]
fn analytic_thermal_prints_the_occupation() {
    let work = tempfile::tempdir().unwrap();
    let output = qdiss(
        &["analytic", "thermal", "--f", "5.594GHz", "--T", "115mK"],
        work.path(),
    );
    assert!(output.status.success(), "{output:?}");
    let value: f64 = stdout(&output).trim().parse().expect("numeric stdout");
    assert!((value - 0.107).abs() / 0.107 < 0.01, "got {value}");
}

#[test]
fn bare_numbers_in_frequency_fields_are_config_errors() {
    let work = tempfile::tempdir().unwrap();
    std::fs::write(work.path().join("run.toml"), "[device]\nkappa_c = 0.477\n").unwrap();
    let output = qdiss(&["reset", "--config", "run.toml", "--out", "o"], work.path());
    assert_eq!(output.status.code(), Some(2));
    let error = stderr_json(&output);
    assert_eq!(error["error"]["kind"], "config");
    let message = error["error"]["message"].as_str().unwrap();
    assert!(message.contains("kappa_c"), "error names the key: {message}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let work = tempfile::tempdir().unwrap();
    std::fs::write(work.path().join("run.toml"), "[device]\nkapa_c = \"477kHz\"\n").unwrap();
    let output = qdiss(&["reset", "--config", "run.toml", "--out", "o"], work.path());
    assert_eq!(output.status.code(), Some(2));
    let message = stderr_json(&output)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(message.contains("kapa_c"), "error names the typo: {message}");
}

#[test]
fn suffixed_frequencies_land_in_the_manifest_as_angular_rates() {
    let work = tempfile::tempdir().unwrap();
    let config = concat!(
        "[device]\n",
        "kappa_c = \"0.477MHz\"\n",
        "[reset]\n",
        "gamma_cav = 51.0\n",
        "tau = { start = 0.0, stop = 0.5, count = 6 }\n",
    );
    std::fs::write(work.path().join("run.toml"), config).unwrap();
    let output = qdiss(&["reset", "--config", "run.toml", "--out", "o"], work.path());
    assert!(output.status.success(), "{output:?}");

    let manifest = manifest(&work.path().join("o"));
    let kappa_c = manifest["config"]["device"]["kappa_c"].as_f64().unwrap();
    assert!(
        (kappa_c - 0.477 * std::f64::consts::TAU).abs() < 1e-9,
        "echo holds rad/us, got {kappa_c}"
    );
    assert_eq!(manifest["experiment"], "reset");
    assert!(manifest["summary"]["recovery_time_us"].as_f64().unwrap() > 0.0);
}

#[test]
fn ringdown_peak_rate_sits_in_the_documented_band() {
    let work = tempfile::tempdir().unwrap();
    let config = concat!(
        "[ringdown]\n",
        "omega_p = { values = [\"2.976GHz\", \"3.006GHz\", \"3.036GHz\"] }\n",
        "g_p = { values = [\"0MHz\", \"5MHz\", \"10MHz\"] }\n",
    );
    std::fs::write(work.path().join("run.toml"), config).unwrap();
    let output = qdiss(
        &["ringdown", "--config", "run.toml", "--out", "map"],
        work.path(),
    );
    assert!(output.status.success(), "{output:?}");

    let manifest = manifest(&work.path().join("map"));
    let max_rate = manifest["summary"]["max_rate_per_us"].as_f64().unwrap();
    assert!(
        (50.0..=60.0).contains(&max_rate),
        "on-resonance full-power rate {max_rate} outside 50..60 /us"
    );
    assert_eq!(manifest["outputs"], serde_json::json!(["ringdown.csv"]));
    let digest = manifest["constants_sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));

    let table = std::fs::read_to_string(work.path().join("map/ringdown.csv")).unwrap();
    assert!(table.starts_with("omega_p_rad_per_us,g_p_rad_per_us,rate_per_us"));
    assert_eq!(table.lines().count(), 1 + 9, "header plus one row per grid point");
}

#[test]
fn seeded_noisy_runs_are_byte_identical() {
    let work = tempfile::tempdir().unwrap();
    let config = concat!(
        "[ringdown]\n",
        "omega_p = { values = [\"3.006GHz\"] }\n",
        "g_p = { values = [\"6MHz\", \"9MHz\"] }\n",
        "noise_sigma = 0.05\n",
    );
    std::fs::write(work.path().join("run.toml"), config).unwrap();
    for out in ["first", "second"] {
        let output = qdiss(
            &["ringdown", "--config", "run.toml", "--seed", "9", "--out", out],
            work.path(),
        );
        assert!(output.status.success(), "{output:?}");
    }
    let first = std::fs::read(work.path().join("first/ringdown.csv")).unwrap();
    let second = std::fs::read(work.path().join("second/ringdown.csv")).unwrap();
    assert_eq!(first, second);
    assert_eq!(manifest(&work.path().join("first"))["seed"], 9);
}

#[test]
fn fit_exponential_recovers_the_generating_parameters() {
    let work = tempfile::tempdir().unwrap();
    let mut rows = String::from("t,y\n");
    for i in 0..40 {
        let t = i as f64 * 0.02;
        rows.push_str(&format!("{t},{}\n", 7.3 * (-4.2 * t).exp() + 0.6));
    }
    std::fs::write(work.path().join("decay.csv"), rows).unwrap();
    let output = qdiss(&["fit", "exponential", "--data", "decay.csv"], work.path());
    assert!(output.status.success(), "{output:?}");

    let fit: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("JSON fit");
    let names: Vec<&str> = fit["names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n.as_str().unwrap())
        .collect();
    let rate_index = names.iter().position(|n| *n == "rate").unwrap();
    let rate = fit["estimates"][rate_index].as_f64().unwrap();
    assert!((rate - 4.2).abs() < 1e-6, "got {rate}");
    assert_eq!(fit["converged"], true);
}
