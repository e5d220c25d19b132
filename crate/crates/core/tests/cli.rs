//! End-to-end behaviour of the `thermal-qsl` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermal-qsl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_ratio(o: &Output) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["ratio"].as_f64().unwrap()
}

#[test]
fn rates_start_at_zero() {
    let o = run(&[
        "rates",
        "--spectrum",
        "lorentzian",
        "--gamma0",
        "0.1",
        "--lambda",
        "1",
        "--omega0",
        "1.1",
        "--omegaL",
        "1",
        "--Omega",
        "0",
        "--T",
        "0",
        "--tau",
        "2",
        "--steps",
        "64",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# provenance: "));
    assert_eq!(lines.next().unwrap(), "t,gamma_plus,gamma_minus,gamma_z");
    assert_eq!(lines.next().unwrap(), "0,0,0,0");
    assert_eq!(lines.count(), 64);
}

#[test]
fn invalid_input_exits_two_and_names_the_field() {
    let o = run(&["rates", "--T", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`T`"));

    let o = run(&["qsl", "--Omega", "0", "--omegaL", "1.1"]);
    assert_eq!(o.status.code(), Some(2), "degenerate dressed frame");
    let o = run(&["qsl", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn qsl_reports_plateau_and_json_keys() {
    let o = run(&["qsl", "--Omega", "0.5", "--T", "0.2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in [
        "ratio",
        "tau_qsl",
        "lambda1",
        "lambda2",
        "lambdaInf",
        "n_dim",
        "flags",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!((v["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn closed_and_generic_methods_agree() {
    let base = [
        "qsl", "--N", "2", "--Omega", "0.3", "--T", "0.2", "--steps", "512", "--method",
    ];
    let generic = json_ratio(&run(&[&base[..], &["generic"]].concat()));
    let closed = json_ratio(&run(&[&base[..], &["closed"]].concat()));
    assert!((generic - closed).abs() < 1e-8);
}

#[test]
fn delta_convention_flag_changes_the_result() {
    let base = [
        "qsl",
        "--Omega",
        "5",
        "--T",
        "0.5",
        "--steps",
        "256",
        "--delta-convention",
    ];
    let integrated = json_ratio(&run(&[&base[..], &["integrated"]].concat()));
    let literal = json_ratio(&run(&[&base[..], &["literal"]].concat()));
    assert!((integrated - literal).abs() > 1e-6);
}

#[test]
fn steps_refinement_is_converged() {
    let at = |steps: &str| {
        json_ratio(&run(&[
            "qsl", "--Omega", "10", "--T", "0.5", "--steps", steps,
        ]))
    };
    assert!((at("512") - at("1024")).abs() < 1e-4);
}

#[test]
fn validate_passes_and_literal_convention_fails() {
    let o = run(&["validate", "--quick"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let o = run(&["validate", "--quick", "--delta-convention", "literal"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rate_equation_residual_order"));
}

fn write_spec(dir: &Path) -> std::path::PathBuf {
    let spec = r#"{
        "figure": "custom",
        "spectrum": {"kind": "lorentzian", "gamma0": 0.1, "lambda": 1.0, "omega0": 1.1},
        "omega_l": 1.0, "tau_d": 2.0, "steps": 128, "initial_state": "excited",
        "axes": [
            {"parameter": "temperature", "min": 0.0, "max": 0.8, "points": 2},
            {"parameter": "omega", "min": 0.0, "max": 10.0, "points": 3}
        ]
    }"#;
    let path = dir.join("spec.json");
    std::fs::write(&path, spec).unwrap();
    path
}

#[test]
fn sweep_output_is_deterministic_and_hash_named() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let mut outputs = Vec::new();
    for (sub, jobs) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(sub);
        let o = run(&[
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--jobs",
            jobs,
            "-o",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let path = stdout(&o).trim().to_string();
        let name = Path::new(&path)
            .file_name()
            .unwrap()
            .to_string_lossy()
            .into_owned();
        assert!(
            name.starts_with("custom_")
                && name.ends_with(".csv")
                && name.len() == "custom_.csv".len() + 16
        );
        outputs.push((name, std::fs::read(&path).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let csv = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 2 + 6);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("temperature,omega,n_qubits,ratio"));

    // The table itself is a valid spec source.
    let replay_dir = dir.path().join("replay");
    let table = dir.path().join("a").join(&outputs[0].0);
    let o = run(&[
        "sweep",
        "--spec",
        table.to_str().unwrap(),
        "-o",
        replay_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(stdout(&o).trim()).unwrap(), outputs[0].1);
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let o = bin()
        .args([
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--format",
            "json",
        ])
        .env("THERMAL_QSL_OUTPUT_DIR", dir.path().join("env"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let path = stdout(&o).trim().to_string();
    assert!(path.starts_with(dir.path().join("env").to_str().unwrap()));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["table"]["kind"], "ratio");
    assert_eq!(v["provenance"]["spec"]["steps"], 128);
}

#[test]
fn scaling_writes_one_row_per_qubit_number() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scaling",
        "--Omega",
        "0.4",
        "--T",
        "0.1",
        "--N-max",
        "5",
        "--steps",
        "128",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(stdout(&o).trim()).unwrap();
    let n: Vec<&str> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(n, ["1", "2", "3", "4", "5"]);
}

#[test]
fn bad_spec_file_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"figure": "custom"}"#).unwrap();
    let o = run(&["sweep", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "sweep",
        "--spec",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
