use std::io::Write;
use std::process::{Command, Stdio};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], config: &str) -> Outcome {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bdcat"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(config.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Outcome {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn config(alpha: f64, beta: f64, task: &str) -> String {
    format!(
        r#"{{"model": {{"rates": {{"kind": "constant", "birth": 1.0, "death": 1.25}}, "alpha": {alpha}, "beta": {beta}}}, "task": {task}}}"#
    )
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn validate_reports_constraints_and_parse_errors() {
    let ok = run(&["validate"], &config(0.4, 0.3, "{}"));
    assert_eq!(ok.code, 0, "{}", ok.stderr);

    let bad = r#"{"model": {"rates": {"kind": "constant", "birth": 0.0, "death": 1.0}, "alpha": 0.1, "beta": 0.1}}"#;
    let out = run(&["validate"], bad);
    assert_eq!(out.code, 2);
    assert!(out.stdout.contains("lambda_0"));

    assert_eq!(run(&["validate"], "{not json").code, 1);
    let unknown = r#"{"model": {"rates": {"kind": "constant", "birth": 1.0, "death": 1.0}, "alpha": 0.1, "beta": 0.1, "gamma": 1}}"#;
    assert_eq!(run(&["validate"], unknown).code, 1);
    assert_eq!(run(&["frobnicate"], "{}").code, 1);
}

#[test]
fn transition_at_time_zero_is_an_indicator() {
    let out = run(&["transition"], &config(0.4, 0.3, r#"{"start": 3, "times": [0.0]}"#));
    assert_eq!(out.code, 0, "{}", out.stderr);
    let n = column(&out.stdout, "n");
    let p = column(&out.stdout, "p_formula");
    for (n, p) in n.iter().zip(&p) {
        assert_eq!(*p, if *n == 3.0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn transition_without_catastrophes_has_no_discrepancy() {
    let out = run(&["transition"], &config(0.0, 0.0, r#"{"start": 2, "times": [0.5, 3.0]}"#));
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(column(&out.stdout, "abs_diff").iter().all(|d| *d < 1e-12));
}

#[test]
fn single_type_flag_agrees_with_the_general_route() {
    let task = r#"{"starts": [0, 1, 5]}"#;
    let general = run(&["catastrophe"], &config(0.7, 0.0, task));
    let single = run(&["catastrophe", "--single-type"], &config(0.7, 0.0, task));
    assert_eq!(general.code, 0, "{}", general.stderr);
    assert_eq!(single.code, 0, "{}", single.stderr);
    for name in ["mean", "second_moment"] {
        for (a, b) in column(&general.stdout, name).iter().zip(column(&single.stdout, name)) {
            assert!((a - b).abs() / b < 1e-8);
        }
    }
    assert!(column(&general.stdout, "p_alpha_first").iter().all(|p| (p - 1.0).abs() < 1e-9));
    assert_eq!(run(&["catastrophe", "--single-type"], &config(0.7, 0.2, task)).code, 2);
}

#[test]
fn catastrophe_requires_a_catastrophe_rate() {
    assert_eq!(run(&["catastrophe"], &config(0.0, 0.0, "{}")).code, 2);
}

#[test]
fn simulate_is_reproducible_and_rejects_small_runs() {
    let cfg = config(0.4, 0.3, r#"{"start": 5}"#);
    let a = run(&["simulate", "--seed", "11", "--reps", "5000"], &cfg);
    let b = run(&["simulate", "--seed", "11", "--reps", "5000"], &cfg);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stdout.contains("chacha8-stream-per-replication-v1"));
    assert_eq!(run(&["simulate", "--reps", "999"], &cfg).code, 2);
}

#[test]
fn crosscheck_fails_when_the_truncation_cannot_converge() {
    let out = run(&["crosscheck", "--max-level", "32", "--reps", "2000"], &config(0.4, 0.3, "{}"));
    assert_eq!(out.code, 4);
}

#[test]
fn crosscheck_skips_catastrophe_checks_without_catastrophes() {
    let out = run(&["crosscheck", "--format", "csv"], &config(0.0, 0.0, r#"{"starts": [0, 2]}"#));
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("skipped"));
}
