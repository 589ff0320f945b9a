use std::path::PathBuf;
use std::process::{Command, Output};

const CLASSICAL: &str = r#"{"m": 1, "n": 1, "k": 1, "tau": 0.5, "t1": 0, "t2": 1, "L": "qd^2",
  "g": ["q"], "l": [0.16666666666666666], "history": "t*(1 - t)", "boundary": {"q": [0]}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isodelay")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("isodelay-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn summary(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json summary on stdout")
}

#[test]
fn list_names_every_example() {
    let out = run(&["list", "--json"]);
    assert_eq!(code(&out), 0);
    let names: Vec<String> = summary(&out)
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["example1", "classical-iso", "autonomous-lq", "lq-terminal"]);
}

#[test]
fn residuals_of_example1() {
    let csv = scratch("r.csv", "");
    let out = run(&["residuals", "--example", "example1", "--grid", "200", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!(s["el_sup"].as_f64().unwrap() <= 1e-7);
    assert_eq!(s["hypothesis_violated"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,regime,el_0,dr_quantity,dr_residual,cdur");
    assert_eq!(lines.len(), 201);
}

#[test]
fn residual_csv_is_deterministic() {
    let a = run(&["residuals", "--example", "example1", "--grid", "50"]);
    let b = run(&["residuals", "--example", "example1", "--grid", "50"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(code(&run(&["residuals", "--example", "example1", "--grid", "0"])), 2);
    assert_eq!(code(&run(&["residuals", "--problem", "/definitely/not/here.json"])), 2);
    let broken = scratch("broken.json", "{\"m\": ");
    assert_eq!(code(&run(&["solve", "--problem", broken.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["conserved", "--example", "example1", "--eta", "1 +"])), 2);
    assert_eq!(code(&run(&["verify", "nonesuch"])), 2);
    assert_eq!(code(&run(&["residuals"])), 2);
}

#[test]
fn conserved_time_translation_on_example1() {
    let csv = scratch("c.csv", "");
    let out = run(&["conserved", "--example", "example1", "--eta", "1", "--xi", "0", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let s = summary(&out);
    assert_eq!(s["hypothesis_violated"], true);
    assert!(s["max_deviation"].as_f64().unwrap() > 1.0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,regime,C\n"));
}

#[test]
fn conserved_trivial_group_is_zero() {
    let out = run(&["conserved", "--example", "example1", "--eta", "0", "--xi", "0", "--grid", "20"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let c: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(c, 0.0);
    }
}

#[test]
fn conserved_classical_energy_is_constant() {
    let out = run(&["conserved", "--example", "classical-iso", "--eta", "1", "--out", "/dev/null"]);
    assert_eq!(code(&out), 0);
    assert!(summary(&out)["max_deviation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn invariance_under_time_translation() {
    let out = run(&["invariance", "--example", "classical-iso", "--eta", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let s = summary(&out);
    assert_eq!(s["invariant"], true);
    assert!(s["invariance_defect"]["whole"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn solve_classical_problem_file() {
    let problem = scratch("classical.json", CLASSICAL);
    let out = run(&["solve", "--problem", problem.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let s = summary(&out);
    assert!((s["lambda"][0].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert_eq!(s["report"]["converged"], true);
}

#[test]
fn solve_without_iterations_does_not_converge() {
    let problem = scratch("classical0.json", CLASSICAL);
    assert_eq!(code(&run(&["solve", "--problem", problem.to_str().unwrap(), "--maxiter", "0"])), 3);
}

#[test]
fn verify_registered_examples() {
    for name in ["example1", "classical-iso", "autonomous-lq", "lq-terminal"] {
        let out = run(&["verify", name]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let out = run(&["verify", "example1", "--json"]);
    let checks = summary(&out)["checks"].as_array().unwrap().clone();
    let dr = checks.iter().find(|c| c["name"] == "dr constancy deviation").unwrap();
    assert_eq!(dr["gated"], false);
}

#[test]
fn verify_rejects_nonpositive_tolerance() {
    assert_eq!(code(&run(&["verify", "classical-iso", "--tol", "0"])), 2);
}
