use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn repcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repcode")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_ladder(dir: &Path, columns: usize) -> String {
    let o = repcode(&["ladder", "--columns", &columns.to_string()]);
    assert!(o.status.success());
    let path = dir.join(format!("ladder{columns}.json"));
    fs::write(&path, &o.stdout).unwrap();
    path.to_str().unwrap().to_string()
}

fn value_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("value")).unwrap().to_string()
}

#[test]
fn solve_four_column_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_ladder(dir.path(), 4);
    let brute = repcode(&["solve", &inst, "--solver", "brute"]);
    assert!(brute.status.success(), "{}", stderr(&brute));
    assert_eq!(value_line(&brute), "value       -7");
    assert!(stdout(&brute).contains("degeneracy  2"));
    for solver in ["frontier", "bnb", "auto"] {
        let o = repcode(&["solve", &inst, "--solver", solver]);
        assert_eq!(value_line(&o), value_line(&brute), "{solver}");
    }
}

#[test]
fn solve_writes_wcnf() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_ladder(dir.path(), 4);
    let out = dir.path().join("l4.wcnf");
    let o = repcode(&["solve", &inst, "--wcnf", out.to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"], -7.0);
    let text = fs::read_to_string(out).unwrap();
    assert!(text.contains("\np wcnf 8 "));
    assert!(text.contains("c scale 1000000"));
}

#[test]
fn malformed_instance_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"vertices\": 2,\n  \"edges\": [[0, 1 1.0]]\n}\n").unwrap();
    let o = repcode(&["solve", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));

    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"vertices": 2, "edges": [[0, 1, 3.0]], "e_max": 1.0}"#).unwrap();
    assert_eq!(repcode(&["solve", invalid.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn refusal_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_ladder(dir.path(), 13);
    let o = repcode(&["solve", &inst, "--solver", "brute"]);
    assert_eq!(o.status.code(), Some(3));
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn single_cell_zero_noise_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"unencoded": {"n_values": [3], "eps_values": [0.0], "trials": 1}}"#);
    let out = dir.path().join("out");
    let o = repcode(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("unencoded.csv")).unwrap();
    assert_eq!(csv, "N,eps_max,K,failure_rate,std_err,code_space_rate,trials\n3,0,1,0,0,1,1\n");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["unencoded"]["trials"], 1);
    // Defaults are written out in full.
    assert_eq!(manifest["config"]["encoded"]["trials"], 400);
    assert_eq!(manifest["outputs"][0]["path"], "unencoded.csv");
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"master_seed": 3,
            "unencoded": {"n_values": [3, 5, 7], "eps_values": [0.2, 0.5, 0.9], "trials": 50},
            "encoded": {"n": 4, "codes": [{"code_graph": "grid", "dims": [2, 2]}], "eps_values": [0.4, 0.8], "trials": 20}}"#,
    );
    for mode in ["unencoded", "encoded"] {
        let a = dir.path().join(format!("{mode}-1"));
        let b = dir.path().join(format!("{mode}-8"));
        for (out, threads) in [(&a, "1"), (&b, "8")] {
            let o = repcode(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads, "--mode", mode]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        let names: &[&str] = if mode == "encoded" { &["encoded.csv", "rescaled.csv"] } else { &["unencoded.csv"] };
        for name in names {
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{mode} {name}");
        }
    }
}

#[test]
fn encoded_sweep_emits_rescaled_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"encoded": {"n": 4, "codes": [{"code_graph": "grid", "dims": [2, 2]}], "eps_values": [0.6], "trials": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = repcode(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--mode", "encoded"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rescaled = fs::read_to_string(out.join("rescaled.csv")).unwrap();
    let mut lines = rescaled.lines();
    assert_eq!(lines.next().unwrap(), "N,eps_max,K,failure_rate,std_err,code_space_rate,trials,code,eps_nominal");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((row[0], row[1], row[2]), ("4", "0.3", "4"));
    assert_eq!((row[7], row[8]), ("rescaled-grid2x2", "0.6"));
}

#[test]
fn manifest_rerun_reproduces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"unencoded": {"n_values": [4, 6], "eps_values": [0.5], "trials": 40}}"#);
    let first = dir.path().join("first");
    let o = repcode(&["sweep", "--config", &cfg, "--out", first.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    let again = dir.path().join("again");
    let o = repcode(&["rerun", first.join("manifest.json").to_str().unwrap(), "--out", again.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(first.join("unencoded.csv")).unwrap(), fs::read(again.join("unencoded.csv")).unwrap());
}

#[test]
fn invalid_sweep_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"unencoded": {"n_values": [], "eps_values": [-0.1], "trials": 0}}"#,
    );
    let o = repcode(&["sweep", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["n_values is empty", "eps_values contains -0.1", "trials must be at least 1"] {
        assert!(err.contains(needle), "{err}");
    }
    let unknown = write_config(dir.path(), "u.json", r#"{"unencoded": {"trails": 5}}"#);
    let o = repcode(&["sweep", "--config", &unknown, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trails"));
}

#[test]
fn demo_finds_failure_and_rescue() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = repcode(&["demo-fig1", "--budget", "10000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("violated intended links: 1"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fig1.json")).unwrap()).unwrap();
    assert_eq!(report["rescue"]["failed"], false);
    assert_eq!(report["ground_states"].as_array().unwrap().len(), 2);
    let again = repcode(&["demo-fig1", "--budget", "10000", "--out", out.to_str().unwrap()]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn demo_exhausted_budget_exits_4() {
    let o = repcode(&["demo-fig1", "--budget", "5", "--eps", "0.01"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("0..5"));
}
