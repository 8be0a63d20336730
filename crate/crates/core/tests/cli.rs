use std::fs;
use std::process::{Command, Output};

use serde_json::Value;
use shrinker_lab::cli::LabConfig;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinker-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_all_gaussian_plane() {
    let out = lab(&["verify-all", "--model", "gaussian", "--m", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report = json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 25);
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(names, sorted, "names sorted and unique");
    for c in checks {
        assert_eq!(c["status"], "pass", "{c}");
        assert!(c["runtime_ms"].is_u64());
    }
    assert_eq!(report["version"], shrinker_lab::VERSION);
}

#[test]
fn verify_all_is_deterministic_up_to_timing() {
    let strip = |mut v: Value| {
        for c in v["checks"].as_array_mut().unwrap() {
            c["runtime_ms"] = Value::Null;
        }
        v
    };
    let a = strip(json(&lab(&["verify-all", "--model", "cylinder"])));
    let b = strip(json(&lab(&["verify-all", "--model", "cylinder"])));
    assert_eq!(a, b);
}

#[test]
fn frequency_csv_on_cylinder() {
    let out = lab(&[
        "frequency",
        "--model",
        "cylinder",
        "--poly",
        "w^2",
        "--rmin",
        "4.5",
        "--rmax",
        "40",
        "--n",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let u_col = headers.iter().position(|h| h == "U").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 64);
    // 2 + eps sqrt(mu) with eps = 0.01, mu = e^{2n+6} 4 and n = 4.
    let cap = 2.0 + 0.01 * (14f64.exp() * 4.0).sqrt();
    for row in &rows {
        let u: f64 = row[u_col].parse().unwrap();
        assert!(u > 0.0 && u <= cap, "U = {u}");
    }
}

#[test]
fn frequency_json_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.json");
    let out = lab(&[
        "frequency",
        "--model",
        "gaussian",
        "--m",
        "1",
        "--poly",
        "z^3",
        "--rmin",
        "1",
        "--rmax",
        "20",
        "--n",
        "8",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let text = v.to_string();
    assert!(text.contains("\"U\""), "{text}");
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = lab(&["spectrum", "--config", "/nonexistent/lab.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lab.json"));
}

#[test]
fn schema_errors_carry_a_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"verify": {"frequency": {"sigma": "wide"}}}"#).unwrap();
    let out = lab(&["verify-all", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/verify/frequency/sigma"));
}

#[test]
fn unknown_model_is_a_config_error() {
    let out = lab(&["spectrum", "--model", "torus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_echo_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.json");
    fs::write(
        &path,
        r#"{"models": [{"kind": "cylinder"}], "verify": {"samples": 4, "frequency": {"resolution": 128}}}"#,
    )
    .unwrap();
    let out = lab(&["verify-all", "--config", path.to_str().unwrap()]);
    let echo = json(&out)["config_echo"].clone();
    let reparsed = LabConfig::from_json_str(&echo.to_string()).unwrap();
    let original = LabConfig::from_json_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(reparsed, original);
    assert_eq!(reparsed.verify.frequency.resolution, 128);
}

#[test]
fn subcommands_emit_json() {
    for args in [
        vec!["spectrum", "--model", "cylinder"],
        vec!["dimension", "--model", "gaussian", "--m", "3", "--d", "4"],
        vec![
            "forms",
            "--model",
            "gaussian",
            "--m",
            "2",
            "--p",
            "1",
            "--mu",
            "3",
            "--form",
            "z2 dz1 - z1 dz2",
        ],
        vec!["heatflow", "--poly", "x^2 + 2t"],
    ] {
        let out = lab(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        json(&out);
    }
}

#[test]
fn non_caloric_heatflow_input_is_rejected() {
    let out = lab(&["heatflow", "--poly", "x^2 + t"]);
    assert_eq!(out.status.code(), Some(2));
}
