use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn reslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reslab")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows only: drops the `#` header/footer lines and the column names.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exponents_json_has_unit_example() {
    let out = reslab(&["exponents", "--s0", "1", "--s1", "1", "--theta", "1", "--kappa", "1", "--out", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["subcommand"], "exponents");
    let e = v["result"]["E"].as_f64().unwrap();
    assert!((e - 1.0 / 13.0).abs() < 1e-15, "E = {e}");
}

#[test]
fn unknown_flag_exits_one() {
    let out = reslab(&["exponents", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn out_of_range_parameter_exits_one() {
    let out = reslab(&["sg-rate", "--kappa", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sg_rate_errors_shrink() {
    let out = reslab(&["sg-rate", "--levels", "2..5"]);
    assert!(out.status.success());
    let errs: Vec<f64> = rows(&stdout(&out)).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(errs.len(), 3);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = reslab(&[
            "btm-quenched",
            "--alpha",
            "12",
            "--n",
            "8,16",
            "--seed",
            "3",
            "--trials",
            "2",
            "--no-bl",
            "--output",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn green_and_resolvent_checks_pass() {
    for cmd in ["green-check", "resolvent-check"] {
        let out = reslab(&[cmd, "--graphs", "10"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("ok=true"));
    }
}

#[test]
fn resistance_of_a_path_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    fs::write(&path, r#"{"n": 3, "edges": [[0, 1, 2.0], [1, 2, 0.5]], "mass": [1, 1, 1]}"#).unwrap();
    let out = reslab(&["resistance", "--network", path.to_str().unwrap()]);
    assert!(out.status.success());
    let table = rows(&stdout(&out));
    assert_eq!(table.len(), 9);
    let r02: f64 = table.iter().find(|r| r[0] == "0" && r[1] == "2").unwrap()[2].parse().unwrap();
    assert!((r02 - 2.5).abs() < 1e-12, "{r02}");
}

#[test]
fn malformed_network_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"n": 2, "edges": [[0, 1, -1.0]], "mass": [1, 1]}"#).unwrap();
    let out = reslab(&["resistance", "--network", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tree_bound_dominates_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.csv");
    let g = dir.path().join("g.csv");
    fs::write(&f, "t,f\n0,0\n0.5,1\n1,0\n").unwrap();
    fs::write(&g, "t,f\n0,0\n0.25,0.5\n0.5,0.2\n0.75,0.9\n1,0\n").unwrap();
    let out = reslab(&["tree-bound", "--f", f.to_str().unwrap(), "--g", g.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row: Vec<f64> = rows(&stdout(&out))[0].iter().map(|x| x.parse().unwrap()).collect();
    let (bound, achieved) = (row[0], row[1]);
    assert!(achieved <= bound * (1.0 + 1e-9), "achieved {achieved} > bound {bound}");
}

#[test]
fn invariants_report_ok() {
    let out = reslab(&["invariants", "--count", "5"]);
    assert!(out.status.success());
    for r in rows(&stdout(&out)) {
        assert_eq!(r[3], "true", "{r:?}");
    }
}
