use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ergolab::experiments::Report;
use serde_json::json;

fn ergolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .args(args)
        .env_remove("ERGOLAB_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, v: &serde_json::Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_every_experiment() {
    let o = ergolab(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["example1", "identity-disjoint", "product-closure", "rank1-family", "spectral-probe"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn run_writes_three_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let o = ergolab(&["run", "spectral-probe", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let json_text = fs::read_to_string(out.join("spectral-probe.json")).unwrap();
    let report: Report = serde_json::from_str(&json_text).unwrap();
    assert_eq!(report.seed, 3);
    assert!(report.passed);
    assert_eq!(report.to_json().unwrap(), json_text);
    assert_eq!(report.config["order"], json!(4096));

    let csv_text = fs::read_to_string(out.join("spectral-probe.csv")).unwrap();
    let mut rows = csv::ReaderBuilder::new().has_headers(false).from_reader(csv_text.as_bytes());
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), report.checks.len() + 1);
    assert_eq!(&records[0][0], "check-id");
    for (r, c) in records[1..].iter().zip(&report.checks) {
        assert_eq!(&r[0], c.id);
        assert_eq!(&r[1], c.anchor);
        assert_eq!(&r[5], if c.passed { "pass" } else { "fail" });
    }

    let md = fs::read_to_string(out.join("spectral-probe.md")).unwrap();
    for c in &report.checks {
        let at = md.find(&format!("\n## {}\n", c.id)).expect("section per check");
        assert!(md[at..].contains(&format!("- anchor: {}", c.anchor)));
    }
}

#[test]
fn format_flag_limits_output_and_seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .args(["run", "identity-disjoint", "--format", "csv", "--out", dir.path().to_str().unwrap()])
        .env("ERGOLAB_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("identity-disjoint.csv")]);
}

#[test]
fn missing_seed_is_a_usage_error() {
    let o = ergolab(&["run", "spectral-probe"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn failing_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // Rotation by 1/3 has no eigenvalue at angle 0.
    let cfg = write(dir.path(), "cfg.json", &json!({"alpha": "0", "expect_witnessed": true}));
    let o = ergolab(&["run", "spectral-probe", "--seed", "1", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("failing checks: sp.eigenvalue"));
    let report: Report = serde_json::from_str(&fs::read_to_string(dir.path().join("spectral-probe.json")).unwrap()).unwrap();
    assert_eq!(report.failing, vec!["sp.eigenvalue"]);
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let unknown_key = write(dir.path(), "a.json", &json!({"ordr": 10}));
    let bad_system = write(dir.path(), "b.json", &json!({"system": {"kind": "rotation", "params": {}}}));
    fs::write(dir.path().join("c.json"), "{not json").unwrap();
    let not_json = dir.path().join("c.json").to_str().unwrap().to_string();
    let missing = dir.path().join("none.json").to_str().unwrap().to_string();
    for cfg in [&unknown_key, &bad_system, &not_json, &missing] {
        let o = ergolab(&["run", "spectral-probe", "--seed", "1", "--config", cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(3), "{cfg}: {}", stderr(&o));
    }
    let o = ergolab(&["run", "spectral-probe", "--seed", "1", "--config", &bad_system, "--out", out]);
    assert!(stderr(&o).contains("config.system.params.alpha"), "{}", stderr(&o));
    let o = ergolab(&["run", "no-such-experiment", "--seed", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("spectral-probe"));
}

#[test]
fn spec_validate_accepts_systems_and_joinings() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "s.json", &json!({"kind": "twist", "params": {"rho": {"type": "cyclic", "order": 3}}}));
    let o = ergolab(&["spec", "validate", &sys]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("valid system `twist` on 2 coordinates"));

    let j = write(
        dir.path(),
        "j.json",
        &json!({"kind": "diagonal", "components": [{"kind": "rotation", "params": {"alpha": "1/7"}}]}),
    );
    let o = ergolab(&["spec", "validate", &j]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("valid joining `diagonal` on 2 coordinates"));

    let triple = write(dir.path(), "t.json", &json!({"kind": "example1-triple", "params": {"alpha": "1/5"}}));
    assert_eq!(ergolab(&["spec", "validate", &triple]).status.code(), Some(0));
}

#[test]
fn spec_validate_reports_the_failing_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        &json!({"kind": "product", "params": {"factors": [{"kind": "rotation", "params": {"alpha": "x"}}]}}),
    );
    let o = ergolab(&["spec", "validate", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("params.factors[0].params.alpha"), "{}", stderr(&o));

    let unknown = write(dir.path(), "u.json", &json!({"kind": "horocycle"}));
    let o = ergolab(&["spec", "validate", &unknown]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unknown system kind"));
}
