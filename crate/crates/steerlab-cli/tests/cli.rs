//! End-to-end tests of the installed binary: exit codes, report schema,
//! and the reference scenarios.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn steerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steerlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        !out.stdout.is_empty(),
        "no report on stdout; stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is one JSON document");
    assert_eq!(v["schema"], "steerlab/1");
    assert_eq!(v["tool"]["name"], "steerlab");
    assert!(v["duration_ms"].as_f64().is_some());
    v
}

#[test]
fn chsh_optimize_certify() {
    let out = steerlab(&[
        "bell", "--kind", "chsh", "--nu1", "0.75", "--zeta", "1.5707963", "--optimize",
        "--certify", "--restarts", "4",
    ]);
    assert!(out.status.success());
    let r = report(&out);
    let value = r["results"]["value"].as_f64().unwrap();
    assert!((value - 1.118033989).abs() < 1e-6, "value {value}");
    assert_eq!(r["results"]["classical_bound"], 1.0);
    assert_eq!(r["results"]["violated"], true);
    assert_eq!(r["results"]["certified"]["matches_stated"], true);
    assert_eq!(r["results"]["certified"]["enumerated_bound"], 1.0);
}

#[test]
fn hardy3_reference_settings() {
    let out = steerlab(&[
        "bell", "--kind", "hardy3", "--nu1", "1", "--zeta", "1.5707963", "--phi", "0",
        "--reference-settings",
    ]);
    assert!(out.status.success());
    let r = report(&out);
    let value = r["results"]["value"].as_f64().unwrap();
    assert!((value - 1.0 / 9.0).abs() < 1e-6, "value {value}");
    assert_eq!(r["results"]["classical_bound"], 0.0);
    assert_eq!(r["results"]["violated"], true);
}

#[test]
fn even_family_without_visibility_stays_classical() {
    let out = steerlab(&["bell", "--kind", "evenN", "--n", "4", "--nu1", "0.5"]);
    assert!(out.status.success());
    let r = report(&out);
    let value = r["results"]["value"].as_f64().unwrap();
    assert!(value <= 1.0 + 1e-9);
    assert_eq!(r["results"]["violated"], false);
}

#[test]
fn degrees_flag_converts_angles() {
    let rad = report(&steerlab(&["bell", "--kind", "chsh", "--nu1", "0.8", "--zeta", "1.0"]));
    let deg = report(&steerlab(&[
        "bell",
        "--kind",
        "chsh",
        "--nu1",
        "0.8",
        "--zeta",
        &format!("{}", 1.0f64.to_degrees()),
        "--degrees",
    ]));
    let a = rad["results"]["value"].as_f64().unwrap();
    let b = deg["results"]["value"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn steering_family_and_rank3_fixture() {
    let out = steerlab(&["steering", "--nu1", "0.7", "--zeta", "1.0472"]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["results"]["premise_satisfied"], true);
    for p in r["results"]["parties"].as_array().unwrap() {
        assert_eq!(p["steerable_to_pure"], true);
    }

    let out = steerlab(&["steering", "--nu1", "0.5", "--zeta", "0"]);
    assert_eq!(report(&out)["results"]["premise_satisfied"], false);

    // Rank-3 mixture: 0.5 on the Bell pair, 0.3 and 0.2 on |01>, |10>.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rank3.json");
    let rho = serde_json::json!({
        "n_qubits": 2,
        "rho": [
            [[0.25, 0.0], [0.0, 0.0], [0.0, 0.0], [0.25, 0.0]],
            [[0.0, 0.0], [0.3, 0.0], [0.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.0], [0.2, 0.0], [0.0, 0.0]],
            [[0.25, 0.0], [0.0, 0.0], [0.0, 0.0], [0.25, 0.0]]
        ]
    });
    std::fs::write(&path, rho.to_string()).unwrap();
    let out = steerlab(&["steering", "--state-file", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(report(&out)["results"]["premise_satisfied"], false);
}

#[test]
fn malformed_state_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"nonsense\": 1}").unwrap();
    let out = steerlab(&["steering", "--state-file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn qca_accepts_and_rejects_with_contracted_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.jsonl");
    let out = steerlab(&[
        "protocol", "qca", "--nu1", "0.7", "--zeta", "1.5707963", "--phi", "1.0472", "--runs",
        "20000", "--inspect", "2000", "--seed", "42", "--transcript", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["accept"], true);
    let coincidence = r["results"]["x_coincidence"].as_f64().unwrap();
    assert!((coincidence - 0.6).abs() < 0.02, "coincidence {coincidence}");
    assert_eq!(r["seed"], 42);

    let lines: Vec<String> = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 20000);
    let first: Value = serde_json::from_str(&lines[0]).unwrap();
    assert!(first["run"].is_u64());
    assert!(first["broadcast"].is_boolean());

    let out = steerlab(&[
        "protocol", "qca", "--nu1", "0.5", "--phi", "1.0472", "--runs", "20000", "--inspect",
        "2000", "--seed", "42",
    ]);
    assert_eq!(out.status.code(), Some(2), "reject must exit 2");
    assert_eq!(report(&out)["results"]["accept"], false);
}

#[test]
fn thirdman_key_statistics() {
    let out = steerlab(&[
        "protocol", "thirdman", "--nu1", "0.9", "--runs", "20000", "--seed", "7",
    ]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["results"]["qber_with_labels"], 0.0);
    assert_eq!(r["results"]["z_agreement"], 1.0);
    let raw = r["results"]["x_qber_without_labels"].as_f64().unwrap();
    assert!((raw - 0.1).abs() < 0.02, "raw x error {raw}");
}

#[test]
fn identical_commands_reproduce_numeric_fields() {
    let args = [
        "protocol", "qca", "--nu1", "0.7", "--phi", "1.0472", "--runs", "3000", "--inspect",
        "300", "--seed", "5",
    ];
    let a = report(&steerlab(&args));
    let b = report(&steerlab(&args));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["params"], b["params"]);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(steerlab(&["bell", "--kind", "chsh"]).status.code(), Some(1));
    assert_eq!(steerlab(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        steerlab(&["bell", "--kind", "hardyN", "--nu1", "0.9"]).status.code(),
        Some(1),
        "hardyN without --n is a usage error"
    );
    let help = steerlab(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(!help.stdout.is_empty());
    let version = steerlab(&["--version"]);
    assert_eq!(version.status.code(), Some(0));

    // Optimizer/reference flags are mutually exclusive.
    assert_eq!(
        steerlab(&[
            "bell", "--kind", "chsh", "--nu1", "0.8", "--optimize", "--reference-settings"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn pretty_goes_to_stderr_only() {
    let plain = steerlab(&["bell", "--kind", "chsh", "--nu1", "0.75"]);
    let pretty = steerlab(&["bell", "--kind", "chsh", "--nu1", "0.75", "--pretty"]);
    assert!(plain.stderr.is_empty());
    assert!(!pretty.stderr.is_empty());
    let a: Value = serde_json::from_slice(&plain.stdout).unwrap();
    let b: Value = serde_json::from_slice(&pretty.stdout).unwrap();
    assert_eq!(a["results"], b["results"]);
}

#[test]
fn settings_file_round_trip() {
    // Evaluate chsh at explicit reference settings read from a file and
    // check it matches the default reference path.
    let reference = report(&steerlab(&[
        "bell", "--kind", "chsh", "--nu1", "0.75", "--zeta", "1.5707963",
    ]));
    let settings = reference["results"]["settings"].clone();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("settings.json");
    std::fs::write(&path, settings.to_string()).unwrap();
    assert!(Path::new(&path).exists());
    let from_file = report(&steerlab(&[
        "bell", "--kind", "chsh", "--nu1", "0.75", "--zeta", "1.5707963", "--settings-file",
        path.to_str().unwrap(),
    ]));
    let a = reference["results"]["value"].as_f64().unwrap();
    let b = from_file["results"]["value"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-12);
}
