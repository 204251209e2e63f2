use std::path::Path;
use std::process::{Command, Output};

use invmgmt_bench::runner::read_csv;
use invmgmt_bench::PctTable;

fn invbench(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_invbench"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "invbench {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_to(path: &Path) -> String {
    invbench(&[
        "run",
        "--agents",
        "oracle,newsvendor,zero",
        "--scenarios",
        "serial-stationary-exo-backlog,base-trend-seasonal-gw-lost",
        "--seeds",
        "0..2",
        "--quiet",
        "--out",
        path.to_str().unwrap(),
    ]);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_to(&dir.path().join("a.csv"));
    let b = run_to(&dir.path().join("b.csv"));
    assert_eq!(a, b);
    let rows = read_csv(a.as_bytes()).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 3);

    let out = invbench(&["report", "--in", dir.path().join("a.csv").to_str().unwrap(), "--json"]);
    let table: PctTable = serde_json::from_slice(&out.stdout).unwrap();
    let oracle: Vec<_> = table.cells.iter().filter(|c| c.agent == "oracle").collect();
    assert_eq!(oracle.len(), 2);
    assert!(oracle.iter().all(|c| (c.pct.unwrap() - 100.0).abs() < 1e-9));

    let text = invbench(&["report", "--in", dir.path().join("a.csv").to_str().unwrap()]);
    assert!(String::from_utf8(text.stdout).unwrap().contains("newsvendor"));
}

#[test]
fn grid_list_prints_22_rows() {
    let out = invbench(&["grid", "list"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 22);
}

#[test]
fn ledger_and_topology_commands() {
    let out = invbench(&[
        "ledger",
        "--agent",
        "ss",
        "--scenario",
        "base-trace-exo-backlog",
        "--seed",
        "3",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 30);

    let out = invbench(&["topology", "serial", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 5);
}

#[test]
fn unknown_agent_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_invbench"))
        .args(["run", "--agents", "ppo", "--seeds", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
