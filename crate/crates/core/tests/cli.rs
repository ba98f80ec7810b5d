//! The `fpe` binary end to end: output files, formats and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use fpe::io::{read_trajectories_csv, read_trajectories_json};

fn fpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpe")).args(args).env("FPE_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data");

#[test]
fn simulate_writes_readable_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = fpe(&["simulate", "--system", "rosette:3", "--W", "3", "--out", json.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("trajectories=27"));
    let trajs = read_trajectories_json(std::fs::File::open(&json).unwrap()).unwrap();
    assert_eq!(trajs.len(), 27);

    let csv = dir.path().join("b.csv");
    let o = fpe(&["simulate", "--system", "bean", "--W", "3", "--seed", "-0.4,0", "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("invariant=true"), "{}", stdout(&o));
    let back = read_trajectories_csv(std::fs::File::open(&csv).unwrap(), "bean").unwrap();
    assert!(!back.is_empty() && back.iter().all(|t| t.window == 3.0));
}

#[test]
fn entropy_writes_report_and_plot_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f8.json");
    let o = fpe(&["entropy", "--system", "figure8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("h ≈ 0.6931 (log 2)"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verdict"], "FINITE");
    assert!(v["slopes"]["sep"].as_array().unwrap().len() == 2);
    let table = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(table.starts_with("eps,n,span,sep\n"));
    assert_eq!(table.lines().count(), 1 + 2 * 4);
}

#[test]
fn system_files_load_and_malformed_ones_exit_2() {
    let o = fpe(&["classify", "--system-file", &format!("{DATA}/fold_pair.json"), "--sigma-samples", "40"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("Sliding="), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name":"c","X":[[[1,0,0]],[[0,0,0]]],"Y":[[[1,0,0]],[[0,0,0]]],"f":[[2,0,0]],"domain":[-1,1,-1,1]}"#).unwrap();
    assert_eq!(fpe(&["classify", "--system-file", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(fpe(&["classify", "--system-file", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(fpe(&["classify"]).status.code(), Some(2));
}

#[test]
fn verify_reports_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let o = fpe(&["verify", "--system", "bean", "--J", "-0.6:-0.1", "--samples", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("all_found=true"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["witnesses"].as_array().unwrap().len(), 8);
    assert!(Path::new(&out).exists());
    assert_eq!(fpe(&["verify", "--system", "bean", "--J", "0.1:0.3"]).status.code(), Some(2));
}

#[test]
fn list_and_help() {
    let o = fpe(&["list-systems"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
    assert!(fpe(&["--help"]).status.success());
    assert_eq!(fpe(&["frobnicate"]).status.code(), Some(2));
}
