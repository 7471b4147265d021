use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mamdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mamdi")).args(args).env_remove("MAMDI_WORKERS").output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analytic_defaults_give_35_rows() {
    let text = stdout(&mamdi(&["analytic"]));
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 35);
    assert!(rows.iter().all(|r| r.contains(",analytic,")));
    assert!(rows[0].starts_with("1.0,sync,sps,"));
    assert!(rows[34].starts_with("35.0,"));
}

#[test]
fn analytic_rows_per_combination() {
    let text = stdout(&mamdi(&["analytic", "--eta-mem", "0.1,0.5,0.9"]));
    assert_eq!(data_lines(&text).len(), 3 * 35);
}

#[test]
fn wcp_rows_carry_mu() {
    let text = stdout(&mamdi(&["analytic", "--source", "wcp", "--mu", "0.7"]));
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 35);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells[2], "wcp");
        assert_eq!(cells[3], "0.7");
    }
}

#[test]
fn every_file_starts_with_provenance() {
    let text = stdout(&mamdi(&["analytic", "--seed", "7", "--distance-km", "5"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# mamdi "));
    let hash = lines.next().unwrap();
    assert!(hash.starts_with("# config_sha256: "));
    assert_eq!(hash.trim_start_matches("# config_sha256: ").len(), 64);
    assert_eq!(lines.next().unwrap(), "# seed: 7");
}

#[test]
fn invalid_config_exits_1_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[channel]\ncollection_efficiency = 1.3\n").unwrap();
    let out_file = dir.path().join("rows.csv");
    let out = mamdi(&["analytic", "--config", path_str(&cfg), "--out", path_str(&out_file)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel.collection_efficiency"), "{err}");
    assert!(err.contains("bad.toml"), "{err}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "only the config file remains");
}

#[test]
fn unknown_field_and_bad_flag_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "[memory]\nefficency = 0.5\n").unwrap();
    assert_eq!(mamdi(&["analytic", "--config", path_str(&cfg)]).status.code(), Some(1));
    assert_eq!(mamdi(&["analytic", "--eta-mem", "1.5"]).status.code(), Some(1));
    assert_eq!(mamdi(&["simulate", "--trials", "0"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_runtime_error() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("missing").join("rows.csv");
    let out = mamdi(&["analytic", "--out", path_str(&target)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["sweep", "--distance-km", "2,4", "--mode", "sync,async", "--trials", "20000", "--seed", "11"];
    for p in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", path_str(p)]);
        stdout(&mamdi(&full));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let args = ["sweep", "--distance-km", "3", "--mode", "async", "--trials", "50000"];
    let run = |workers: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_mamdi")).args(args).env("MAMDI_WORKERS", workers).output().unwrap();
        stdout(&out)
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn json_format_mirrors_csv_keys() {
    let text = stdout(&mamdi(&["analytic", "--format", "json", "--distance-km", "1,2"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["mode"], "sync");
    assert!(rows[0]["q_se"].is_null());
    assert_eq!(v["header"]["tool"], "mamdi");
}

#[test]
fn simulate_hook_matches_chain_mean() {
    let text = stdout(&mamdi(&[
        "simulate",
        "--mode",
        "async",
        "--force-p-load",
        "0.5",
        "--force-survive",
        "1",
        "--trials",
        "400000",
        "--histogram",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let r = &v["result"];
    let q = r["q_gain"].as_f64().unwrap();
    assert!((q - 0.75).abs() < 4.0 * r["q_se"].as_f64().unwrap(), "q = {q}");
    let m = r["mean_m"].as_f64().unwrap();
    assert!((m - 7.0 / 3.0).abs() / (7.0 / 3.0) < 0.01, "mean_m = {m}");
    assert!(r["flags"].as_str().unwrap().contains("forced_probabilities"));
    let hist = v["m_histogram"].as_array().unwrap();
    let total: u64 = hist.iter().map(|h| h["count"].as_u64().unwrap()).sum();
    assert_eq!(total, r["n_success"].as_u64().unwrap());
}

#[test]
fn single_trial_is_flagged_low_statistics() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&mamdi(&["simulate", "--trials", "1"]))).unwrap();
    assert_eq!(v["low_statistics"], true);
    assert!(v["result"]["flags"].as_str().unwrap().contains("low_statistics"));
    assert_eq!(v["result"]["n_trials"], 1);
}

#[test]
fn unknown_figure_lists_valid_names() {
    let dir = TempDir::new().unwrap();
    let out = mamdi(&["compare", "sync-foo", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["sync-eff", "sync-coh", "async-eff", "async-coh", "mean-gc"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn compare_writes_table_curves_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = mamdi(&["compare", "mean-gc", "--trials", "2000", "--out", path_str(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let table = fs::read_to_string(dir.path().join("mean-gc.csv")).unwrap();
    let rows = data_lines(&table);
    // MC, analytic chain and guide rows for 3 coherence times x 50 distances.
    assert_eq!(rows.len(), 3 * 3 * 50);
    for tau in ["0.01", "0.1", "0.5"] {
        assert!(rows.iter().any(|r| r.split(',').nth(5) == Some(tau)));
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["table"], "mean-gc.csv");
    let curves = manifest["curves"].as_array().unwrap();
    assert!(!curves.is_empty());
    for c in curves {
        let text = fs::read_to_string(dir.path().join(c["file"].as_str().unwrap())).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], format!("distance_km,{}", c["column"].as_str().unwrap()));
        assert_eq!(body.len() - 1, c["points"].as_u64().unwrap() as usize);
        assert!(body[1..].iter().all(|l| l.split(',').count() == 2));
    }
    assert!(curves.iter().any(|c| c["column"] == "std_clock_ms"));
}
