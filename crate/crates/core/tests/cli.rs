use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fadsim::io::{read_report_json, read_trace_csv, read_trace_jsonl, read_verify_csv};
use fadsim::{simulate, ModelParams, RunConfig};

fn fadsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fadsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_json_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = fadsim(&[
        "simulate",
        "--alpha",
        "0.8",
        "--eps",
        "0.05",
        "--n",
        "5000",
        "--seeds",
        "0..4",
        "--format",
        "json",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("Q_a="), "{stdout}");

    let text = fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "params",
        "horizon",
        "seeds",
        "q_a",
        "q_theta",
        "fads_emerged",
        "margin",
        "mean_gap",
        "restricted_fad_count",
        "ratio",
        "fad_bound_m",
        "per_seed",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["seeds"].as_array().unwrap().len(), 4);

    let report = read_report_json(text.as_bytes()).unwrap();
    assert_eq!(report.horizon, 5000);
    assert_eq!(report.seeds, vec![0, 1, 2, 3]);
    assert!(report.fads_emerged);
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--alpha", "0.7", "--eps", "0.02", "--n", "3000", "--seed", "11", "--format",
        "csv",
    ];
    let a = fadsim(&args);
    let b = fadsim(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn trace_files_match_library_and_guides() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = fadsim(&[
        "trace",
        "--alpha",
        "0.8",
        "--eps",
        "0.05",
        "--n",
        "100",
        "--seed",
        "3",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let steps = read_trace_csv(fs::File::open(&csv).unwrap()).unwrap();
    let params = ModelParams::new(0.8, 0.05).unwrap();
    let lib = simulate(&RunConfig::new(params, 100, 3).unwrap()).unwrap();
    assert_eq!(steps, lib.steps);

    let guides = fs::read_to_string(dir.path().join("t.guides.csv")).unwrap();
    assert!(guides.contains("1.3862943611198"), "{guides}");
    assert!(guides.contains("-1.3862943611198"), "{guides}");

    let json = dir.path().join("t.jsonl");
    let o = fadsim(&[
        "trace",
        "--alpha",
        "0.8",
        "--eps",
        "0.05",
        "--n",
        "100",
        "--seed",
        "3",
        "--format",
        "json",
        "--out",
        path_str(&json),
    ]);
    assert_eq!(code(&o), 0);
    let steps = read_trace_jsonl(std::io::BufReader::new(fs::File::open(&json).unwrap())).unwrap();
    assert_eq!(steps, lib.steps);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"alpha": 0.8, "eps": 0.05, "n": 2000, "seed": 4}"#).unwrap();
    let from_cfg = fadsim(&["simulate", "--config", path_str(&cfg), "--format", "csv"]);
    let from_flags = fadsim(&[
        "simulate", "--alpha", "0.8", "--eps", "0.05", "--n", "2000", "--seed", "4", "--format",
        "csv",
    ]);
    assert_eq!(
        code(&from_cfg),
        0,
        "{}",
        String::from_utf8_lossy(&from_cfg.stderr)
    );
    assert_eq!(from_cfg.stdout, from_flags.stdout);

    fs::write(&cfg, r#"{"alpha": 0.8, "bogus": 1}"#).unwrap();
    assert_eq!(code(&fadsim(&["simulate", "--config", path_str(&cfg)])), 2);
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        vec![
            "simulate", "--alpha", "0.4", "--eps", "0.05", "--n", "100", "--seed", "0",
        ],
        vec![
            "simulate", "--alpha", "0.8", "--eps", "0.2", "--n", "100", "--seed", "0",
        ],
        vec![
            "simulate", "--alpha", "0.8", "--eps", "0.05", "--n", "0", "--seed", "0",
        ],
        vec![
            "trace", "--alpha", "0.8", "--eps", "0.05", "--n", "0", "--seed", "0",
        ],
        vec!["simulate", "--alpha", "0.8"],
        vec![
            "simulate", "--alpha", "0.8", "--eps", "0.05", "--n", "100", "--format", "xml",
        ],
        vec!["bogus"],
    ] {
        let o = fadsim(&args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn unwritable_output_exits_1() {
    let o = fadsim(&[
        "simulate",
        "--alpha",
        "0.8",
        "--eps",
        "0.05",
        "--n",
        "100",
        "--seed",
        "0",
        "--out",
        "/nonexistent-dir/x/report.json",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_round_trip_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = fadsim(&[
        "verify",
        "--alpha-grid",
        "0.8",
        "--eps-grid",
        "0.01,0.05",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_verify_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.pass && r.interval_high < r.m));
    assert_eq!(rows[1].max_cascade_len, 3);
}

#[test]
fn verify_reports_failure_with_exit_3() {
    // a grid point where the oracle interval sits above M
    let o = fadsim(&["verify", "--alpha-grid", "0.95", "--eps-rel-grid", "0.5"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_interval_below_m() {
    let o = fadsim(&["oracle", "--alpha", "0.8", "--eps", "0.01"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let col = rdr
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "value_high")
        .unwrap();
    let highs: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[col].parse().unwrap())
        .collect();
    assert!(!highs.is_empty());
    assert!(highs.iter().all(|&h| h < 60.7));
}

#[test]
fn sweep_rows_in_grid_order() {
    let o = fadsim(&[
        "sweep",
        "--alpha-grid",
        "0.7,0.8",
        "--eps-grid",
        "0.02,0.05",
        "--n",
        "2000",
        "--seed-count",
        "3",
        "--jobs",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let idx: Vec<(usize, f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].parse().unwrap(),
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(idx.len(), 4);
    assert!(idx.iter().enumerate().all(|(i, row)| row.0 == i));
    assert_eq!((idx[0].1, idx[0].2), (0.7, 0.02));
    assert_eq!((idx[3].1, idx[3].2), (0.8, 0.05));
}
