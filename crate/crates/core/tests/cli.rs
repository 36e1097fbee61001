mod common;

use std::path::Path;
use std::process::{Command, Output};

fn finiso(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finiso")).args(args).current_dir(dir).output().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = &common::test_chains()[1].1;
    std::fs::write(dir.path().join("p.json"), serde_json::to_string(&p.to_json()).unwrap()).unwrap();
    std::fs::write(dir.path().join("periodic.txt"), vec!["a"; 301].join(" ")).unwrap();
    std::fs::write(dir.path().join("x.txt"), p.format_sequence(&p.sample(301, 1))).unwrap();
    dir
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn exit_codes() {
    let d = setup();
    assert_eq!(finiso(d.path(), &["entropy", "--process", "p.json"]).status.code(), Some(0));
    assert_eq!(finiso(d.path(), &["entropy", "--bogus"]).status.code(), Some(2));
    assert_eq!(finiso(d.path(), &["--jobs", "0", "entropy", "--process", "p.json"]).status.code(), Some(2));
    let missing = finiso(d.path(), &["entropy", "--process", "nope.json"]);
    assert_eq!(missing.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert!(err.get("kind").is_some() && err.get("message").is_some());
    let bad_skeleton = finiso(d.path(), &["fillers", "--process", "p.json", "--skeleton", "2,0,2"]);
    assert_eq!(bad_skeleton.status.code(), Some(1));
}

#[test]
fn entropy_is_exact_for_dyadic_processes() {
    let d = setup();
    let (a, _) = common::meshalkin();
    std::fs::write(d.path().join("a.json"), serde_json::to_string(&a.to_json()).unwrap()).unwrap();
    let v = json(&finiso(d.path(), &["entropy", "--process", "a.json"]));
    assert_eq!(v["entropy"], "2");
    assert_eq!(v["exact"], "2");
}

#[test]
fn diagnose_separates_periodic_from_sampled() {
    let d = setup();
    let v = json(&finiso(d.path(), &["diagnose", "--process", "p.json", "--seq", "periodic.txt"]));
    assert_eq!(v["verdict"], "diverges");
    let v = json(&finiso(d.path(), &["diagnose", "--process", "p.json", "--seq", "x.txt"]));
    assert_eq!(v["verdict"], "bounded");
}

#[test]
fn build_apply_and_verify() {
    let d = setup();
    let b = finiso(d.path(), &["build-iso", "--a", "p.json", "--c", "p.json", "--rank-cap", "2", "--precision", "2", "--out", "t.json"]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    let a = finiso(d.path(), &["apply", "--tree", "t.json", "--seq", "x.txt", "--range", "-5..5"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let v = finiso(
        d.path(),
        &["verify", "--tree", "t.json", "--trials", "200", "--factor-samples", "10", "--shifts", "2", "--roundtrip-trials", "20", "--window", "101", "--out", "r.json"],
    );
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["factor"]["violations"], 0);
}
