use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvp-spectra")).args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn peculiar_pair_positive_and_negative() {
    let anti = fixture("antiperiodic.json");
    let v = json_stdout(&run(&["peculiar", &anti, &fixture("special_rank_one.json")]));
    assert_eq!(v["is_peculiar"], true);
    assert_eq!(v["rank_one"], true);
    assert_eq!(v["rank_resolvent_diff"], 1);
    let v = json_stdout(&run(&["peculiar", &anti, &fixture("special_rank_two.json")]));
    assert_eq!(v["is_peculiar"], true);
    assert_eq!(v["rank_one"], false);
    assert_eq!(v["rank_resolvent_diff"], 2);
}

#[test]
fn antiperiodic_spectrum_has_eight_eigenvalues() {
    let v = json_stdout(&run(&["spectrum", &fixture("antiperiodic.json"), "--rect", "-10,10,-10,10"]));
    assert_eq!(v["count"], 8);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn broken_problem_exits_one_with_diagnostics() {
    let out = run(&["validate", &fixture("broken.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"].as_str().unwrap().contains("maximality violated"));
    assert_eq!(v["diagnostics"][0]["code"], "maximality_violated");
}

#[test]
fn usage_errors_exit_two() {
    let anti = fixture("antiperiodic.json");
    assert_eq!(run(&["spectrum", &anti, "--rect", "1,0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["det", &anti, "--lambda", "1"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--format", "xml", "validate", &anti]).status.code(), Some(2));
}

#[test]
fn missing_file_is_a_domain_error() {
    let out = run(&["validate", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_is_byte_stable() {
    let anti = fixture("antiperiodic.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["spectrum", &anti, "--rect", "-10,10,-10,10"],
        vec!["--format", "csv", "det", &anti, "--rect", "-2,2,-1,1", "--grid", "4"],
        vec!["classify", &anti],
        vec!["lattice", &anti, "--range", "3"],
    ];
    for args in cases {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = run(&["--format", "csv", "det", &fixture("antiperiodic.json"), "--lambda", "1,0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda_re,lambda_im,delta_re,delta_im"));
    for field in lines.next().unwrap().split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{field}");
    }
}

#[test]
fn resolve_round_trips_through_csv() {
    let out = run(&["resolve", &fixture("antiperiodic.json"), "--lambda", "0.3,0.1", "--f", &fixture("rhs.csv")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x,re_y1,im_y1,re_y2,im_y2\n"));
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    // antiperiodic: y(0) = -y(1)
    for k in 1..5 {
        assert!((first[k] + last[k]).abs() < 1e-9, "{k}");
    }
}

#[test]
fn adjoint_flag_switches_problem() {
    let special = fixture("special_rank_two.json");
    let direct = json_stdout(&run(&["classify", &special]));
    let adjoint = json_stdout(&run(&["--adjoint", "classify", &special]));
    assert_eq!(direct["weakly_regular"], false);
    assert_eq!(adjoint["weakly_regular"], false);
    assert_ne!(direct["canonical_form"], adjoint["canonical_form"]);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["validate", "classify", "det", "lattice", "spectrum", "rank-diff", "resolve", "peculiar", "probe"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
}
