use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn byzcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_byzcount"))
        .args(args)
        .env_remove("BYZCOUNT_OUT")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn gen_writes_one_line_per_edge_and_reads_back() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.txt");
    let o = byzcount(&[
        "gen",
        "--n",
        "16",
        "--d",
        "2",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    // A header line, then one line per edge.
    assert_eq!(text.lines().skip(1).filter(|l| !l.trim().is_empty()).count(), 16);
    let g = byzcount::graph::read_graph(text.as_bytes()).unwrap();
    assert_eq!(g, byzcount::graph::generate_h_graph(16, 2, 4).unwrap());
}

#[test]
fn gen_into_a_bad_path_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = write(dir.path(), "file", "");
    let o = byzcount(&["gen", "--n", "16", "--d", "2", "--out", &format!("{blocker}/g.txt")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_both_outputs_with_the_config_embedded() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n":128,"seed":7,"trials":2}"#);
    let out = dir.path().join("res");
    let o = byzcount(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let nodes = fs::read_to_string(out.join("nodes.csv")).unwrap();
    assert!(nodes.starts_with("# {"));
    assert!(nodes.contains("\"seed\":7"));
    assert_eq!(data_lines(&out.join("nodes.csv")).len(), 1 + 2 * 128);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
    assert_eq!(summary[0]["config"]["seed"], 7);
    assert!(summary[0]["trial_seed"].is_u64());
}

#[test]
fn env_var_sets_the_default_output_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n":64}"#);
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_byzcount"))
        .args(["run", "--config", &cfg])
        .env("BYZCOUNT_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("summary.json").exists());
}

#[test]
fn config_errors_exit_3_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let bad_strategy = write(dir.path(), "a.json", r#"{"n":128,"strategy":{"name":"nope"}}"#);
    let o = byzcount(&["run", "--config", &bad_strategy, "--dry-run"]);
    assert_eq!(o.status.code(), Some(3));
    let bad_eps = write(dir.path(), "b.json", r#"{"n":128,"epsilon":2.0}"#);
    let o = byzcount(&["run", "--config", &bad_eps, "--dry-run"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
    let missing = dir.path().join("none.json");
    let o = byzcount(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dry_run_prints_the_resolved_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n":128}"#);
    let o = byzcount(&["run", "--config", &cfg, "--seed", "11", "--dry-run"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["d"], 8);
    assert!(!dir.path().join("results").exists());
}

#[test]
fn sweep_emits_one_row_per_cell_and_repeats_exactly() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"n":[64,128],"d":[6,8],"trials":2,"seed":5}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = byzcount(&["sweep", "--config", &spec, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(data_lines(&a.join("sweep.csv")).len(), 1 + 4);
    assert_eq!(
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(b.join("sweep.csv")).unwrap()
    );
}

#[test]
fn sweep_marks_failed_cells_and_keeps_going() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"n":[64],"epsilon":[0.1,5.0]}"#);
    let out = dir.path().join("o");
    let o = byzcount(&["sweep", "--config", &spec, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = data_lines(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains(",ok,"));
    assert!(rows[2].contains("failed"));
}

#[test]
fn sweep_over_the_cell_cap_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"n":[64,128],"d":[6,8],"max_cells":3}"#);
    assert_eq!(
        byzcount(&["sweep", "--config", &spec, "--dry-run"]).status.code(),
        Some(3)
    );
}

/// A one-cell sweep aggregates exactly like `run` with that cell's seed.
#[test]
fn one_cell_sweep_matches_run() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"n":[128],"trials":3,"seed":9}"#);
    let s = dir.path().join("s");
    assert!(byzcount(&["sweep", "--config", &spec, "--out", s.to_str().unwrap()])
        .status
        .success());
    let seed = byzcount::rng::derive_seed(9, 0).to_string();
    let cfg = write(dir.path(), "c.json", r#"{"n":128,"trials":3}"#);
    let r = dir.path().join("r");
    assert!(
        byzcount(&["run", "--config", &cfg, "--seed", &seed, "--out", r.to_str().unwrap()])
            .status
            .success()
    );
    assert_eq!(data_lines(&s.join("sweep.csv")), data_lines(&r.join("aggregate.csv")));
}

#[test]
fn analyze_summarizes_each_trial() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n":128,"trials":2,"seed":3}"#);
    let out = dir.path().join("r");
    assert!(byzcount(&["run", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let table = dir.path().join("t.csv");
    let o = byzcount(&[
        "analyze",
        "--config",
        out.join("nodes.csv").to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("# {"));
    let rows = data_lines(&table);
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("trial,honest,decided"));
    assert!(rows[1].starts_with("0,128,"));
}

#[test]
fn baseline_protocol_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n":128,"delta":0.6}"#);
    let out = dir.path().join("b");
    let o = byzcount(&[
        "run",
        "--config",
        &cfg,
        "--protocol",
        "baseline",
        "--byz-value",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["protocol"], "baseline");
    assert_eq!(v["trials"][0]["max_final"], 500);
}
