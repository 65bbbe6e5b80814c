//! Command-line drivers: simulate, sweep, bounds and infer-map. Every command
//! writes its files plus a `manifest.json` into one output directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::bounds::{
    overlay_points, random_assignment_bounds, write_bounds_csv, write_overlay_csv,
};
use crate::config::{numeric_axis, parse_override, ConfigError, RunConfig};
use crate::maps::{read_beacon_log, write_cell_stats, MapBuilder, MapsError, DEFAULT_MIN_SAMPLES};
use crate::sim::{
    run, steady_state_stats, write_commands_csv, write_lifetimes_csv, write_metrics_csv, SimError,
    SteadyState, STEADY_HEADER,
};
use crate::EntityId;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Maps { path: PathBuf, source: MapsError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "parked-rsu",
    version,
    about = "Self-organizing RSU networks of parked cars"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its metric series.
    Simulate(SimulateArgs),
    /// Run one simulation per axis value and seed, then summarize.
    Sweep(SweepArgs),
    /// Sample random RSU assignments and overlay a decision run.
    Bounds(BoundsArgs),
    /// Infer a coverage map from a beacon log.
    InferMap(InferMapArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    pub duration: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_sig: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_sat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_cov: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_bat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub range_multiplier: Option<f64>,
    /// Output directory; defaults to the config, then $PARKED_RSU_OUT, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Any other parameter as `key=value` or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Numeric parameter to vary, e.g. `w_sat`.
    #[arg(long)]
    pub axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Seeds per value, counting up from the configured seed.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Concurrent runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Random assignments to draw; defaults to `bounds.samples`.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct InferMapArgs {
    /// Beacon log with lines `time_s,tx_id,cell_x,cell_y,rssi`.
    pub log: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    pub min_samples: u32,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        RunArgs {
            config: config.into(),
            ..RunArgs::default()
        }
    }

    /// `--set` pairs first so the named flags win.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut ov = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                ov.push((k.to_string(), v));
            }
        };
        push("sim.seed", self.seed.map(|v| v.to_string()));
        push("sim.duration_s", self.duration.map(|v| v.to_string()));
        push("decision.w_sig", self.w_sig.map(|v| v.to_string()));
        push("decision.w_sat", self.w_sat.map(|v| v.to_string()));
        push("decision.w_cov", self.w_cov.map(|v| v.to_string()));
        push("decision.w_bat", self.w_bat.map(|v| v.to_string()));
        push(
            "radio.range_multiplier",
            self.range_multiplier.map(|v| v.to_string()),
        );
        Ok(ov)
    }

    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config, &self.overrides()?)?;
        if let Some(out) = &self.out {
            cfg.sim.output_dir = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_at(&path))?;
    Ok(path)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_at(dir))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: Option<&RunConfig>,
    extra: serde_json::Value,
    files: &[PathBuf],
) -> Result<PathBuf, CliError> {
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.map(|c| c.sim.seed),
        "config_digest": cfg.map(RunConfig::digest),
        "config": cfg.map(|c| serde_json::to_value(c).expect("config serializes")),
        "files": names,
        "details": extra,
    });
    write_file(dir, "manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })
}

/// Runs one simulation; returns the output directory.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<PathBuf, CliError> {
    let cfg = args.run.load()?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let out = run(&cfg)?;
    let mut files = vec![
        write_file(&dir, "metrics.csv", |w| write_metrics_csv(&out.metrics, w))?,
        write_file(&dir, "lifetimes.csv", |w| {
            write_lifetimes_csv(&out.lifetimes, w)
        })?,
        write_file(&dir, "commands.csv", |w| {
            write_commands_csv(&out.commands, w)
        })?,
    ];
    let steady = steady_state_stats(&out.metrics, cfg.sim.discard_s).ok();
    if let Some(s) = &steady {
        files.push(write_file(&dir, "steady_state.csv", |w| {
            writeln!(w, "{STEADY_HEADER}")?;
            writeln!(w, "{}", s.csv_fields())
        })?);
    }
    let extra = json!({
        "spawned": out.spawned,
        "parking_events": out.parking_events,
        "decisions": out.decisions,
        "assignments": out.assignments,
        "messages": out.messages,
        "steady_state": steady,
    });
    files.push(write_manifest(&dir, "simulate", Some(&cfg), extra, &files)?);
    Ok(dir)
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: String,
    pub seed: u64,
    pub digest: String,
    pub steady: SteadyState,
}

/// Runs every (value, seed) pair and returns the runs in input order.
pub fn sweep_runs(
    base: &RunConfig,
    axis: &str,
    values: &[String],
    seeds: u64,
    jobs: usize,
) -> Result<Vec<SweepRun>, CliError> {
    let (section, key) = numeric_axis(axis)?;
    let qualified = format!("{section}.{key}");
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if seeds == 0 {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    }
    let mut configs = Vec::new();
    for v in values {
        v.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("sweep value `{v}` is not a number")))?;
        for i in 0..seeds {
            let ov = [
                (qualified.clone(), v.clone()),
                ("sim.seed".to_string(), (base.sim.seed + i).to_string()),
            ];
            configs.push((v.clone(), base.with_overrides(&ov)?));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} jobs: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|(value, cfg)| {
                let out = run(cfg)?;
                Ok(SweepRun {
                    value: value.clone(),
                    seed: cfg.sim.seed,
                    digest: cfg.digest(),
                    steady: steady_state_stats(&out.metrics, cfg.sim.discard_s)?,
                })
            })
            .collect()
    })
}

/// Per-seed rows in `sweep_runs.csv`, pooled rows in `sweep_summary.csv`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<PathBuf, CliError> {
    let cfg = args.run.load()?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let runs = sweep_runs(&cfg, &args.axis, &args.values, args.seeds, args.jobs)?;
    let (section, key) = numeric_axis(&args.axis)?;
    let axis = format!("{section}.{key}");
    let mut files = vec![write_file(&dir, "sweep_runs.csv", |w| {
        writeln!(w, "axis,value,seed,{STEADY_HEADER}")?;
        for r in &runs {
            writeln!(w, "{axis},{},{},{}", r.value, r.seed, r.steady.csv_fields())?;
        }
        Ok(())
    })?];
    files.push(write_file(&dir, "sweep_summary.csv", |w| {
        writeln!(w, "axis,value,runs,{STEADY_HEADER}")?;
        for v in &args.values {
            let group: Vec<SteadyState> = runs
                .iter()
                .filter(|r| &r.value == v)
                .map(|r| r.steady)
                .collect();
            let pooled = SteadyState::pooled(&group);
            writeln!(w, "{axis},{v},{},{}", group.len(), pooled.csv_fields())?;
        }
        Ok(())
    })?);
    let extra = json!({
        "axis": axis,
        "values": args.values,
        "seeds": args.seeds,
        "runs": runs.iter().map(|r| json!({
            "value": r.value, "seed": r.seed, "config_digest": r.digest,
        })).collect::<Vec<_>>(),
    });
    files.push(write_manifest(&dir, "sweep", Some(&cfg), extra, &files)?);
    Ok(dir)
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<PathBuf, CliError> {
    let cfg = args.run.load()?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let n = args.samples.unwrap_or(cfg.bounds.samples);
    let result = random_assignment_bounds(&cfg, n, cfg.sim.seed)?;
    let mut files = vec![write_file(&dir, "bounds.csv", |w| {
        write_bounds_csv(&result.samples, w)
    })?];
    let points = if n > 0 {
        let out = run(&cfg)?;
        overlay_points(&out.metrics, cfg.sim.discard_s)
    } else {
        Vec::new()
    };
    files.push(write_file(&dir, "overlay.csv", |w| {
        write_overlay_csv(&points, w)
    })?);
    let extra = json!({
        "samples": n,
        "skipped_empty": result.skipped_empty,
        "overlay_points": points.len(),
    });
    files.push(write_manifest(&dir, "bounds", Some(&cfg), extra, &files)?);
    Ok(dir)
}

pub fn cmd_infer_map(args: &InferMapArgs) -> Result<PathBuf, CliError> {
    let f = File::open(&args.log).map_err(io_at(&args.log))?;
    let records = read_beacon_log(BufReader::new(f)).map_err(|source| CliError::Maps {
        path: args.log.clone(),
        source,
    })?;
    let mut builder = MapBuilder::new();
    for r in &records {
        builder.record_beacon(r.cell, r.rssi);
    }
    let (scm, stats) = builder.finalize(EntityId(0), args.min_samples);
    let dir = args.out.clone();
    prepare_dir(&dir)?;
    let mut files = vec![
        write_file(&dir, "cell_stats.csv", |w| write_cell_stats(&stats, w))?,
        write_file(&dir, "scm.csv", |w| scm.write_csv(w))?,
    ];
    let extra = json!({
        "log": args.log,
        "beacons": records.len(),
        "observed_cells": stats.len(),
        "covered_cells": scm.covered_count(),
        "min_samples": args.min_samples,
    });
    files.push(write_manifest(&dir, "infer-map", None, extra, &files)?);
    Ok(dir)
}

pub fn dispatch(cli: &Cli) -> Result<PathBuf, CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::InferMap(a) => cmd_infer_map(a),
    }
}
