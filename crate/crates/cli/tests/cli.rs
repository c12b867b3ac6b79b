use std::io::Write;
use std::process::{Command, Output};

fn fifdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fifdim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn model_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn validate_builtin_and_file() {
    let o = fifdim(&["validate", "builtin:example61"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: example61"));

    let f = model_file(
        r#"
        [model]
        n = 2
        knots = [0.0, 0.4, 1.0]
        y = [0.0, 1.0, 0.0]
        [scaling]
        s1 = "0.3"
        s2 = "0.3"
        [offsets]
        q1 = "x"
        q2 = "1 - x"
        "#,
    );
    let o = fifdim(&["validate", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not uniform"));
}

#[test]
fn bad_inputs_have_distinct_codes() {
    assert_eq!(fifdim(&["validate", "builtin:koch"]).status.code(), Some(2));
    assert_eq!(fifdim(&["validate", "/nonexistent/model.toml"]).status.code(), Some(2));
    assert_eq!(fifdim(&["eval", "builtin:example61", "--level", "20"]).status.code(), Some(3));
    assert_eq!(fifdim(&["eval"]).status.code(), Some(1));
    assert_eq!(fifdim(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = fifdim(&["eval", "builtin:example61", "--level", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,f");
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[1], "0.0000000000000000e0,2.0000000000000000e0");
}

#[test]
fn outputs_are_byte_identical() {
    let a = fifdim(&["dim", "builtin:weierstrass", "--param", "lambda=0.6", "--kmax", "4"]);
    let b = fifdim(&["dim", "builtin:weierstrass", "--param", "lambda=0.6", "--kmax", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn weierstrass_gamma_method_is_exact() {
    let o = fifdim(&["dim", "builtin:weierstrass", "--param", "lambda=0.6", "--method", "gamma", "--kmax", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let exact = &v["output"]["verdict"]["exact"];
    let want = 2.0 + 0.6f64.ln() / 3f64.ln();
    assert!((exact["value"].as_f64().unwrap() - want).abs() < 1e-9);
    assert_eq!(exact["source"], "constant_offset_sum");
    assert_eq!(v["command"], "dim");
    assert_eq!(v["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn rho_csv_and_osc_csv() {
    let o = fifdim(&["rho", "builtin:example61", "--kmax", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("k,rho_upper,rho_lower"));
    assert_eq!(text.lines().count(), 4);

    let o = fifdim(&["osc", "builtin:example61", "--kmax", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().last().unwrap().ends_with(",divergent"));
}

#[test]
fn matrix_coordinates() {
    let o = fifdim(&["matrices", "builtin:example61", "--level", "2", "--kind", "lower"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# {"));
    assert_eq!(text.lines().count(), 1 + 27);
}

#[test]
fn boxcount_table() {
    let o = fifdim(&["boxcount", "builtin:affine", "--param", "d=0,0", "--kmin", "2", "--kmax", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 5);
    let o = fifdim(&["boxcount", "builtin:affine", "--kmin", "3", "--kmax", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_reports_table_and_dimension() {
    let o = fifdim(&["reproduce", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let out = &v["output"];
    assert_eq!(out["rows"].as_array().unwrap().len(), 12);
    let d = out["dimension"]["value"].as_f64().unwrap();
    assert!((1.374..=1.384).contains(&d));
    assert_eq!(out["divergence_level"], 6);
}
