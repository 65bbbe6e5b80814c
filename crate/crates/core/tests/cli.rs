use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parked_rsu::grid::{build_manhattan_city, Cell};
use parked_rsu::maps::write_beacon_log;
use parked_rsu::radio::PropagationConfig;
use parked_rsu::survey::{generate_survey, SurveyConfig};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parked-rsu"))
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

const SHORT: &str = "[sim]\nduration_s = 900\ndiscard_s = 300.0\n";

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere.toml");
    let out = run_args(&["simulate", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.toml"), "{err}");
}

#[test]
fn invalid_value_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let out = run_args(&["simulate", cfg.to_str().unwrap(), "--w-sat", "-0.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("decision.w_sat"));
}

#[test]
fn zero_duration_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let dir = tmp.path().join("out");
    let out = run_args(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--duration",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    ok(&out);
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert_eq!(
        text,
        "t,active_rsus,coverage_pct,mean_signal,mean_saturation,area_per_rsu\n"
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let before = fs::read(&cfg).unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        ok(&run_args(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]));
        outputs.push(dir);
    }
    for f in [
        "metrics.csv",
        "lifetimes.csv",
        "commands.csv",
        "steady_state.csv",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(fs::read(&cfg).unwrap(), before);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(outputs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn flags_beat_file_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "[decision]\nw_sat = 0.4\n[sim]\nduration_s = 10\n",
    );
    let dir = tmp.path().join("o");
    ok(&run_args(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--w-sat",
        "0.1",
        "--set",
        "sim.seed=5",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["decision"]["w_sat"], 0.1);
    assert_eq!(m["seed"], 5);
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn sweep_writes_one_summary_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let dir = tmp.path().join("sw");
    ok(&run_args(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--axis",
        "w_sat",
        "--values",
        "0.05,0.1,0.2,0.3,0.4",
        "--seeds",
        "2",
        "--jobs",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let summary = csv_rows(&dir.join("sweep_summary.csv"));
    assert_eq!(summary.len(), 5);
    assert!(summary
        .iter()
        .all(|r| r["axis"] == "decision.w_sat" && r["runs"] == "2"));
    assert_eq!(csv_rows(&dir.join("sweep_runs.csv")).len(), 10);
}

#[test]
fn single_value_sweep_equals_simulate() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let sw = tmp.path().join("sw");
    let sim = tmp.path().join("sim");
    ok(&run_args(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--axis",
        "w_cov",
        "--values",
        "0.3",
        "--seeds",
        "1",
        "--out",
        sw.to_str().unwrap(),
    ]));
    ok(&run_args(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--w-cov",
        "0.3",
        "--out",
        sim.to_str().unwrap(),
    ]));
    let mut row = csv_rows(&sw.join("sweep_summary.csv")).remove(0);
    row.remove("axis");
    row.remove("value");
    row.remove("runs");
    let steady = csv_rows(&sim.join("steady_state.csv")).remove(0);
    assert_eq!(row, steady);
}

#[test]
fn sweep_rejects_unknown_axis() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    for axis in ["w_nothing", "mode"] {
        let out = run_args(&[
            "sweep",
            cfg.to_str().unwrap(),
            "--axis",
            axis,
            "--values",
            "1",
            "--out",
            tmp.path().join("x").to_str().unwrap(),
        ]);
        assert!(!out.status.success(), "{axis}");
    }
}

#[test]
fn bounds_with_zero_samples_is_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), SHORT);
    let dir = tmp.path().join("b");
    ok(&run_args(&[
        "bounds",
        cfg.to_str().unwrap(),
        "--samples",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read_to_string(dir.join("bounds.csv")).unwrap(),
        "active,mean_signal,mean_saturation\n"
    );
}

fn bounds_scatter(dir: &Path, cfg: &Path, name: &str, samples: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&run_args(&[
        "bounds",
        cfg.to_str().unwrap(),
        "--samples",
        samples,
        "--out",
        out.to_str().unwrap(),
    ]));
    out
}

#[test]
fn bounds_scatter_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "[sim]\nduration_s = 600\ndiscard_s = 300.0\n");
    let a = bounds_scatter(tmp.path(), &cfg, "a", "2000");
    let b = bounds_scatter(tmp.path(), &cfg, "b", "2000");
    assert_eq!(
        fs::read(a.join("bounds.csv")).unwrap(),
        fs::read(b.join("bounds.csv")).unwrap()
    );
    assert_eq!(csv_rows(&a.join("overlay.csv")).len(), 300);
}

#[test]
fn bounds_scatter_spans_weak_to_strong_signal() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "[sim]\nduration_s = 600\ndiscard_s = 300.0\n");
    let dir = bounds_scatter(tmp.path(), &cfg, "a", "10000");
    let rows = csv_rows(&dir.join("bounds.csv"));
    let sig: Vec<f64> = rows
        .iter()
        .map(|r| r["mean_signal"].parse().unwrap())
        .collect();
    let lo = sig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("mean_signal spans {lo:.3} .. {hi:.3}");
    assert!(lo < 2.5 && hi > 4.5, "span {lo} .. {hi}");
}

#[test]
fn infer_map_on_empty_log() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("empty.csv");
    fs::write(&log, "").unwrap();
    let dir = tmp.path().join("m");
    ok(&run_args(&[
        "infer-map",
        log.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read_to_string(dir.join("cell_stats.csv")).unwrap(),
        "cell_x,cell_y,count,mean,sd,bimodal\n"
    );
    assert_eq!(
        fs::read_to_string(dir.join("scm.csv")).unwrap(),
        "cell_x,cell_y,strength\n"
    );
}

#[test]
fn infer_map_reports_malformed_line() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("bad.csv");
    fs::write(
        &log,
        "time_s,tx_id,cell_x,cell_y,rssi\n0.0,1,2,3,40\n0.1,1,2,x,41\n",
    )
    .unwrap();
    let out = run_args(&[
        "infer-map",
        log.to_str().unwrap(),
        "--out",
        tmp.path().join("m").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn infer_map_recovers_synthetic_truth() {
    let grid = build_manhattan_city(4, 4, 1, 3).unwrap();
    let prop = PropagationConfig::default();
    let survey = generate_survey(&grid, &prop, &SurveyConfig::new(Cell::new(8, 8)), 11).unwrap();
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("log.csv");
    write_beacon_log(&survey.records, fs::File::create(&log).unwrap()).unwrap();
    let dir = tmp.path().join("m");
    ok(&run_args(&[
        "infer-map",
        log.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]));
    let stats = csv_rows(&dir.join("cell_stats.csv"));
    let scm: BTreeMap<(i32, i32), u8> = csv_rows(&dir.join("scm.csv"))
        .iter()
        .map(|r| {
            (
                (r["cell_x"].parse().unwrap(), r["cell_y"].parse().unwrap()),
                r["strength"].parse().unwrap(),
            )
        })
        .collect();
    let mut dense = 0;
    let mut right = 0;
    for r in &stats {
        let count: u32 = r["count"].parse().unwrap();
        if count < 50 {
            continue;
        }
        let c = (r["cell_x"].parse().unwrap(), r["cell_y"].parse().unwrap());
        dense += 1;
        let truth = survey.truth.get(Cell::new(c.0, c.1)).value();
        if scm.get(&c) == Some(&truth) {
            right += 1;
        }
    }
    assert!(dense > 10);
    assert!(right as f64 >= 0.95 * dense as f64, "{right}/{dense}");
}
