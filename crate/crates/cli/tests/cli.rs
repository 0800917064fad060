use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const L: f64 = std::f64::consts::PI;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(study: &str, config: &Path, out: &Path, extra: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_visco-inverse"));
    cmd.arg(study)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out);
    for (k, v) in extra {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn orthogonal(extra: &str) -> String {
    format!(
        r#"{{"operator": {{"length": {L}}}, "grid": {{"T": {}, "steps": 6000}}, "modes": 6,
            "source": [0, 0, 1, 0, 0, 0]{extra}}}"#,
        2.0 * L
    )
}

fn summary(csv: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap()
}

fn csv_rows(csv: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn reconstruct_recovers_third_mode() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", &orthogonal(""));
    let out = dir.path().join("r.csv");
    let o = run("reconstruct", &config, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "k,truth,recovered,abs_error");
    for row in &rows {
        let expect = if row[0] == 3.0 { 1.0 } else { 0.0 };
        assert!((row[2] - expect).abs() <= 1e-6);
    }
    let s = summary(&out);
    for key in ["study", "config", "results", "diagnostics"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["study"], "reconstruct");
    // defaults resolved into the effective config
    assert_eq!(s["config"]["trials"], 50);
    assert_eq!(s["config"]["measurement"], "derivative");
    assert_eq!(s["config"]["kernel"]["type"], "zero");
    assert_eq!(s["config"]["grid"]["steps"], 6000);
    assert!(s["results"]["relative_l2_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn measured_trace_path_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        &orthogonal(
            r#", "measurement": "trace", "noise_level": 1e-3, "kernel": {"type": "exponential", "beta": 1, "alpha": 1}"#,
        ),
    );
    let out = dir.path().join("r.csv");
    let o = run("reconstruct", &config, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let err = summary(&out)["results"]["relative_l2_error"]
        .as_f64()
        .unwrap();
    assert!(err > 0.0 && err < 5e-2, "{err}");
}

#[test]
fn below_threshold_gram_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"operator": {{"length": {L}}}, "grid": {{"T": {L}, "steps": 4000}}, "modes": 32}}"#
    );
    let config = write_config(dir.path(), "c.json", &body);
    let out = dir.path().join("fb.csv");
    let o = run("frame-bounds", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&out);
    assert!(s["diagnostics"]["failure"]
        .as_str()
        .unwrap()
        .contains("singular Gram"));
    assert_eq!(s["results"]["above_threshold"], false);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad_dt = write_config(
        dir.path(),
        "dt.json",
        r#"{"operator": {"length": 1}, "grid": {"T": 1, "dt": 0}, "modes": 2}"#,
    );
    assert_eq!(run("simulate", &bad_dt, &out, &[]).status.code(), Some(2));
    let memory = write_config(
        dir.path(),
        "m.json",
        r#"{"operator": {"length": 1}, "grid": {"T": 1, "steps": 100}, "modes": 2,
            "kernel": {"type": "exponential", "beta": 1, "alpha": 1}}"#,
    );
    assert_eq!(
        run("l2-counterexample", &memory, &out, &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        run("no-such-study", &memory, &out, &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        run("simulate", &dir.path().join("missing.json"), &out, &[])
            .status
            .code(),
        Some(2)
    );
    let unwritable = dir.path().join("no/such/dir/x.csv");
    assert_eq!(
        run("simulate", &memory, &unwritable, &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        run("simulate", &memory, &out, &[("VISCO_THREADS", "0")])
            .status
            .code(),
        Some(2)
    );
    // the summary must never replace the config
    let clash = dir.path().join("m.csv");
    assert_eq!(run("simulate", &memory, &clash, &[]).status.code(), Some(2));
    assert!(std::fs::read_to_string(&memory)
        .unwrap()
        .contains("exponential"));
}

#[test]
fn table_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"operator": {{"length": {L}, "observed_endpoints": ["right", "left"]}},
            "grid": {{"T": 7.0, "dt": 0.001}}, "modes": 8,
            "initial_data": {{"xi": [1, 0, 0, 0, 0, 0, 0, 0], "eta": [0, 1, 0, 0, 0, 0, 0, 0]}}}}"#
    );
    let config = write_config(dir.path(), "c.json", &body);
    let cases = [
        (
            "simulate",
            "t,bu_left,bu_right,bu_prime_left,bu_prime_right,bw_left,bw_right",
            7001,
        ),
        ("zest-decay", "n,lambda,defect", 8),
        (
            "l2-counterexample",
            "n,lambda,scaled_norm,min_gram_eigenvalue",
            8,
        ),
        ("stability-scan", "trial,ratio", 50),
        ("frame-bounds", "index,eigenvalue", 16),
    ];
    for (study, header, rows) in cases {
        let out = dir.path().join(format!("{study}.csv"));
        let o = run(study, &config, &out, &[]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{study}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let (h, r) = csv_rows(&out);
        assert_eq!(h, header, "{study}");
        assert_eq!(r.len(), rows, "{study}");
        assert_eq!(summary(&out)["study"], study);
    }
}
