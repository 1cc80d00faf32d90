use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
schema_version = 1
x0 = 0.7
t_max = 2.0

[coefficients]
beta = { kind = "piecewise_linear", knots = [0.0, 2.0], values = [0.5, 1.5] }
sigma = { kind = "constant", value = 1.0 }
a = { kind = "piecewise_constant", knots = [0.0, 1.0], values = [0.6, 0.3] }
a_tilde = { kind = "constant", value = 1.0 }

[run]
s = 0.1
t = 1.9
n = 4000
seed = 3
h = 0.1
"#;

const ATOMS: &str = "\n[jump_measure]\nkind = \"atoms\"\natoms = [[0.3, 1.0], [1.2, 0.5]]\n";

fn config(dir: &TempDir, name: &str, extra: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, format!("{BASE}{extra}")).unwrap();
    p
}

fn cirjump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cirjump"))
        .args(args)
        .env_remove("CIRJUMP_THREADS")
        .output()
        .unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_accepts_admissible_and_rejects_restrictive_violation() {
    let dir = TempDir::new().unwrap();
    let ok = config(&dir, "ok.toml", "\n[jump_measure]\nkind = \"tempered_power\"\nscale = 1.0\nrho = 0.4\nrate = 1.0\n");
    let o = cirjump(&["validate", arg(&ok)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["report"]["exact_samplers_available"], true);

    let bad = config(&dir, "bad.toml", "\n[jump_measure]\nkind = \"tempered_power\"\nscale = 1.0\nrho = 0.7\nrate = 1.0\n");
    let o = cirjump(&["validate", arg(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.7"));
}

#[test]
fn non_summable_measure_fails_validation() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", "\n[jump_measure]\nkind = \"tempered_power\"\nscale = 1.0\nrho = 1.2\nrate = 1.0\n");
    assert_eq!(cirjump(&["validate", arg(&p)]).status.code(), Some(1));
}

#[test]
fn parse_errors_exit_with_two_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", "\n[controls]\ni_celss = 10\n");
    let o = cirjump(&["validate", arg(&p)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("i_celss") && err.contains("line"), "{err}");
    assert_eq!(cirjump(&["validate", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn unknown_scheme_and_suite_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let out = dir.path().join("out");
    assert_eq!(cirjump(&["simulate", arg(&p), "--scheme", "milstein", "--output-dir", arg(&out)]).status.code(), Some(2));
    assert_eq!(cirjump(&["verify", arg(&p), "--suite", "everything"]).status.code(), Some(2));
}

#[test]
fn laplace_prints_full_precision_csv() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let o = cirjump(&["laplace", arg(&p), "--lambdas", "0,0.5,2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,value,error_estimate"));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert_eq!(values[0], 1.0);
    assert!(values[1] < 1.0 && values[2] < values[1] && values[2] > 0.0);
}

#[test]
fn sample_is_reproducible_and_independent_of_threads() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let oa = cirjump(&["--threads", "1", "sample", arg(&p), "--n", "10000", "--output", arg(&a)]);
    let ob = cirjump(&["--threads", "3", "sample", arg(&p), "--n", "10000", "--output", arg(&b)]);
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(stdout(&oa), stdout(&ob));
    let summary: serde_json::Value = serde_json::from_str(stdout(&oa).trim()).unwrap();
    assert_eq!(summary["n"], 10000);
    assert!(summary["mean"].as_f64().unwrap() > 0.0);
    assert!(summary["variance"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 10001);
}

#[test]
fn sample_h_has_atom_at_zero() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let o = cirjump(&["sample", arg(&p), "--component", "H", "--n", "5000", "--output", arg(&dir.path().join("h.csv"))]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(summary["zero_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn sampling_is_refused_when_the_restrictive_condition_fails() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", "\n[jump_measure]\nkind = \"tempered_power\"\nscale = 1.0\nrho = 0.7\nrate = 1.0\n");
    let o = cirjump(&["sample", arg(&p), "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    // Transforms remain available.
    assert!(cirjump(&["laplace", arg(&p), "--lambdas", "1"]).status.success());
}

#[test]
fn simulate_writes_paths_and_manifest() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    for scheme in ["euler", "exact_skeleton", "branching", "absorbed_cir"] {
        let out = dir.path().join(scheme);
        let o = cirjump(&["simulate", arg(&p), "--scheme", scheme, "--n", "4", "--h", "0.2", "--output-dir", arg(&out)]);
        assert!(o.status.success(), "{scheme}: {}", String::from_utf8_lossy(&o.stderr));
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["scheme"], scheme);
        assert_eq!(manifest["paths"].as_array().unwrap().len(), 4);
        let csv = std::fs::read_to_string(out.join("path_000003.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,value,jump_flag"));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 10);
        assert!((rows[0][0] - 0.1).abs() < 1e-12 && (rows[9][0] - 1.9).abs() < 1e-12);
        assert!(rows.iter().all(|r| r[1] >= 0.0));
    }
}

#[test]
fn verify_emits_json_lines_and_exit_status() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let o = cirjump(&["verify", arg(&p), "--suite", "kernels"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 5);
    assert!(lines[..lines.len() - 1].iter().all(|l| l["passed"] == true && l["check"].is_string()));
    assert_eq!(lines.last().unwrap()["passed"], true);

    let o = cirjump(&["--format", "table", "verify", arg(&p), "--suite", "transition-K", "--n", "20000"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("suite transition-K: PASS"));
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let p = config(&dir, "c.toml", ATOMS);
    let o = cirjump(&["sample", arg(&p), "--n", "50", "--seed", "11", "--t", "1.0", "--output", arg(&dir.path().join("x.csv"))]);
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["n"], 50);
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["t"], 1.0);
}
