use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rov_core::config::ScenarioConfig;
use rov_core::scenario::{compare_standalone_vs_compound, PairedReport, ScenarioReport};
use serde_json::Value;

fn rov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rov")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    path(&p).to_string()
}

fn manifest_outputs_exist(dir: &Path) -> Value {
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for o in m["outputs"].as_array().unwrap() {
        assert!(Path::new(o.as_str().unwrap()).exists(), "{o}");
    }
    assert!(m["config_digest"].as_str().unwrap().starts_with("sha256:"));
    m
}

#[test]
fn simulate_writes_benchmark_grids_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = rov(&["simulate", "--out", path(d)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["demand.csv", "fuel.csv", "pv_cost.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name}");
        let text = String::from_utf8(x).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 12);
        assert_eq!(lines.count(), 10_000);
    }
    let m = manifest_outputs_exist(&a);
    assert_eq!(m["seed"], 42);
    let digest_b = manifest_outputs_exist(&b)["config_digest"].clone();
    assert_eq!(m["config_digest"], digest_b);
}

#[test]
fn invalid_config_exits_2_listing_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rov(&["simulate", "--paths", "0", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_paths"));

    let cfg = write_config(tmp.path(), r#"{"costs": {"r": -0.1, "dnsp_share": 2.0}}"#);
    let o = rov(&["value", "--config", &cfg, "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("costs.r") && err.contains("costs.dnsp_share"), "{err}");

    let cfg = write_config(tmp.path(), "{ not json");
    assert_eq!(rov(&["value", "--config", &cfg, "--out", path(tmp.path())]).status.code(), Some(2));
}

#[test]
fn value_benchmark_defers_and_standalone_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rov(&["value", "--standalone", "--paths", "4000", "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: ScenarioReport = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.recommendation.as_str(), "defer");
    assert_eq!(report.flexible_npv, report.standard_npv + report.option_value);

    let paired: PairedReport = serde_json::from_str(&fs::read_to_string(tmp.path().join("paired.json")).unwrap()).unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.run.n_paths = 4000;
    assert_eq!(paired, compare_standalone_vs_compound(&cfg).unwrap());

    let stops = fs::read_to_string(tmp.path().join("stopping_times.csv")).unwrap();
    assert_eq!(stops.lines().count(), 4001);
    manifest_outputs_exist(tmp.path());
}

#[test]
fn value_worthless_config_abandons() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"costs": {"c_dg": 1.0},
            "processes": {"demand": {"sigma": 0.0}, "fuel": {"sigma": 0.0}, "pv_cost": {"sigma": 0.0}},
            "run": {"n_paths": 200}}"#,
    );
    let out = tmp.path().join("out");
    let o = rov(&["value", "--config", &cfg, "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["recommendation"], "abandon");
    assert_eq!(r["option_value"], 0.0);
}

#[test]
fn value_csv_format_and_byte_identical_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = rov(&["value", "--format", "csv", "--standalone", "--paths", "1000", "--seed", "7", "--out", path(d)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["report.csv", "paired.csv", "stopping_times.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let text = fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(text.starts_with("scenario,description,year1_pct"));
}

#[test]
fn sensitivity_summary_has_table_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = tmp.path().join("sweep.json");
    fs::write(
        &sweep,
        r#"{"sweeps": [
            {"parameter": "mu_d", "values": [0.03]},
            {"parameter": "sigma_d", "values": [0.2]},
            {"parameter": "beta_f", "values": [0.15]},
            {"parameter": "sigma_f", "values": [0.2]},
            {"parameter": "sigma_pv", "values": [0.2]}
        ]}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = rov(&["sensitivity", "--sweep", path(&sweep), "--paths", "1000", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(
        lines[0],
        "scenario,description,year1_pct,year2_pct,year3_pct,year4_pct,year5_pct,standard_npv_k,rov_k,flexible_npv_k"
    );
    assert!(lines[1].starts_with("S1,Benchmark,"));
    assert!(lines[2].starts_with("S2,mu_d = 0.03,"));
    assert!(out.join("reports/S6.json").exists());
    manifest_outputs_exist(&out);
}

#[test]
fn sensitivity_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.json");
    fs::write(&empty, r#"{"sweeps": []}"#).unwrap();
    let out = tmp.path().join("out");
    let o = rov(&["sensitivity", "--sweep", path(&empty), "--paths", "500", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 2);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"sweeps": [{"parameter": "volatility", "values": [0.1]}]}"#).unwrap();
    let o = rov(&["sensitivity", "--sweep", path(&bad), "--paths", "500", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("volatility"));
}

fn load_csv(unit: &str, scale: f64) -> String {
    let mut s = format!("# units: {unit}\ntimestamp,power\n");
    for day in 0..730u32 {
        let date = chrono_like(day);
        let level = (30.0 + 3.0 * (day as f64 / 365.0) + ((day * 37 % 11) as f64) * 0.3) * scale;
        for q in 0..96 {
            let p = if (68..78).contains(&q) { level * 1.25 } else { level * 0.7 };
            s.push_str(&format!("{date} {:02}:{:02}:00,{p}\n", q / 4, (q % 4) * 15));
        }
    }
    s
}

/// `YYYY-MM-DD` for day offset from 2022-01-01, without a date library.
fn chrono_like(offset: u32) -> String {
    let mut days = offset;
    let mut year = 2022;
    loop {
        let len = if year % 4 == 0 { 366 } else { 365 };
        if days < len {
            break;
        }
        days -= len;
        year += 1;
    }
    let months = [31, if year % 4 == 0 { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let mut m = 0;
    while days >= months[m] {
        days -= months[m];
        m += 1;
    }
    format!("{year}-{:02}-{:02}", m + 1, days + 1)
}

fn price_csv(values: &[f64]) -> String {
    let mut s = String::from("timestamp,price\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{}-{:02}-01,{v}\n", 2000 + i / 12, i % 12 + 1));
    }
    s
}

fn reverting_prices() -> Vec<f64> {
    let mut x = 1.5;
    (0..240)
        .map(|i| {
            let shock = ((i * 7919 % 101) as f64 / 101.0 - 0.5) * 0.2;
            x = 2.6 + 0.7 * (x - 2.6) + shock;
            x
        })
        .collect()
}

#[test]
fn calibrate_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (load, prices, out) = (tmp.path().join("load.csv"), tmp.path().join("prices.csv"), tmp.path().join("out"));
    fs::write(&load, load_csv("MVA", 1.0)).unwrap();
    fs::write(&prices, price_csv(&reverting_prices())).unwrap();
    let o = rov(&[
        "calibrate", "--load", path(&load), "--thermal-limit", "35MVA", "--prices", path(&prices), "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&fs::read_to_string(out.join("demand_calibration.json")).unwrap()).unwrap();
    assert_eq!(d["model"], "gbm");
    assert!(d["mu"].as_f64().unwrap() > 0.0);
    let f: Value = serde_json::from_str(&fs::read_to_string(out.join("fuel_calibration.json")).unwrap()).unwrap();
    assert_eq!(f["model"], "mean_reverting");
    assert!((f["s_bar"].as_f64().unwrap() - 2.6).abs() < 0.2);
    manifest_outputs_exist(&out);
}

#[test]
fn calibrate_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (load, prices, out) = (tmp.path().join("load.csv"), tmp.path().join("prices.csv"), tmp.path().join("out"));
    fs::write(&prices, price_csv(&reverting_prices())).unwrap();
    let run = |limit: &str| {
        rov(&["calibrate", "--load", path(&load), "--thermal-limit", limit, "--prices", path(&prices), "--out", path(&out)])
    };

    fs::write(&load, load_csv("MVA", 1.0)).unwrap();
    let o = run("35000kW");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unit mismatch"));

    let mut text = load_csv("kW", 1000.0);
    text = text.replacen(",21000\n", ",21O00\n", 1);
    fs::write(&load, text).unwrap();
    let o = run("35000kW");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn calibrate_price_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let (load, prices, out) = (tmp.path().join("load.csv"), tmp.path().join("prices.csv"), tmp.path().join("out"));
    fs::write(&load, load_csv("MVA", 1.0)).unwrap();
    let run = || {
        rov(&["calibrate", "--load", path(&load), "--thermal-limit", "35MVA", "--prices", path(&prices), "--out", path(&out)])
    };

    fs::write(&prices, price_csv(&[2.4; 60])).unwrap();
    let o = run();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let f: Value = serde_json::from_str(&fs::read_to_string(out.join("fuel_calibration.json")).unwrap()).unwrap();
    assert_eq!(f["sigma"], 0.0);
    assert!(f["beta"].is_null());

    let walk: Vec<f64> = (0..240).map(|i| 2.0 + 0.01 * i as f64).collect();
    fs::write(&prices, price_csv(&walk)).unwrap();
    assert_eq!(run().status.code(), Some(3));
}
