//! End-to-end checks of the `episim` binary.

use std::path::Path;
use std::process::{Command, Output};

fn episim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const PROGRAM: &str = "\
_start:
 MOV R0, #7
 MOV R1, #1280
 STR R0, [R1]
 TRAP #0
";

#[test]
fn asm_disasm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.s"), PROGRAM).unwrap();
    let out = episim(&["asm", "t.s", "-o", "t.img"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("t.img.manifest").exists());

    let out = episim(&["disasm", "t.img", "-o", "t2.s"], dir.path());
    assert!(out.status.success());
    let out = episim(&["asm", "t2.s", "-o", "t2.img"], dir.path());
    assert!(out.status.success());
    let a = std::fs::read(dir.path().join("t.img")).unwrap();
    let b = std::fs::read(dir.path().join("t2.img")).unwrap();
    assert_eq!(a, b, "round trip changed the encoding");
}

#[test]
fn run_reports_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.s"), PROGRAM).unwrap();
    assert!(episim(&["asm", "t.s", "-o", "t.img"], dir.path()).status.success());
    let out = episim(
        &[
            "run", "--config", "e16", "--load", "0=t.img", "--until", "core:0",
            "--trace", "t.csv", "--report", "r.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"], "ok");
    assert_eq!(report["cores"][0]["halt_code"], 0);
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("cycle,mesh,event,row,col,kind,dest"));
}

#[test]
fn run_without_load_fails_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = episim(&["run", "--config", "e16"], dir.path());
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(line.trim()).expect("stderr is JSON");
    assert_eq!(err["error"], "run");
}

#[test]
fn traffic_json_is_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let out = episim(
        &["traffic", "--pattern", "uniform", "--rate", "0.2", "--cycles", "200", "--seed", "9"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["conserved"], true);
    assert_eq!(v["seed"], 9);
}

#[test]
fn unknown_litmus_name_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = episim(&["litmus", "nonesuch"], dir.path());
    assert!(!out.status.success());
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "litmus");
}

#[test]
fn perfmodel_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = episim(&["perfmodel", "--preset", "e64"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["peak_gflops"], 102.4);
    assert!(!episim(&["perfmodel", "--preset", "bogus"], dir.path()).status.success());
}
