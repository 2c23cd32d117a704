//! Implementations of the `nanorc` subcommands. Each returns a
//! [`StageError`] naming the stage that failed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ReservoirKind, RunConfig};
use crate::dynamics::calibrate_coupling;
use crate::error::Error;
use crate::experiment::{run_experiment, AtStage, Experiment, Stage, StageError};

type CmdResult<T> = std::result::Result<T, StageError>;

fn load_config(path: &Path, out: Option<&Path>) -> CmdResult<RunConfig> {
    let mut cfg = RunConfig::load(path).at(Stage::Config)?;
    if let Some(dir) = out {
        // an explicit --out is taken relative to the working directory
        cfg.output_dir = std::env::current_dir()
            .map(|cwd| cwd.join(dir))
            .unwrap_or_else(|_| dir.to_path_buf());
    }
    Ok(cfg)
}

/// `run` / `esn`: one experiment, all artifacts written to the output
/// directory.
pub fn cmd_run(
    config: &Path,
    out: Option<&Path>,
    force: Option<ReservoirKind>,
) -> CmdResult<(Experiment, PathBuf)> {
    let mut cfg = load_config(config, out)?;
    if let Some(kind) = force {
        cfg.reservoir = kind;
    }
    let exp = run_experiment(&cfg, None)?;
    let dir = cfg.resolved_output_dir();
    exp.write_artifacts(&dir)?;
    Ok((exp, dir))
}

/// Trace stride used when none is given: one row every 10 integrator steps.
pub const DEFAULT_TRACE_STRIDE: u64 = 10;

/// `trace`: runs the benchmark stream on the nanomagnet reservoir and writes
/// a dense m_z trace of the selected magnets (all when `indices` is empty)
/// to `trace.csv`.
pub fn cmd_trace(
    config: &Path,
    indices: &[usize],
    stride: u64,
    out: Option<&Path>,
) -> CmdResult<PathBuf> {
    let mut cfg = load_config(config, out)?;
    cfg.reservoir = ReservoirKind::Nanomagnet;
    let layout = cfg.load_layout().at(Stage::Layout)?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= layout.len()) {
        return Err(Error::OutOfRange(format!(
            "trace index {bad} out of range for {} magnets",
            layout.len()
        )))
        .at(Stage::Config);
    }
    let intervals = (cfg.task.n_waves * crate::task::WAVE_LEN + 1) as u64;
    let total = cfg.sim.steps_per_sample().at(Stage::Config)? * intervals;
    if stride == 0 || stride > total {
        return Err(Error::OutOfRange(format!(
            "trace stride {stride} must lie in 1..={total} steps"
        )))
        .at(Stage::Config);
    }
    let exp = run_experiment(&cfg, Some(stride))?;
    let trace = exp.trace.as_ref().expect("nanomagnet run records a trace");
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir)
        .map_err(|e| Error::io(&dir, e))
        .at(Stage::Output)?;
    let path = dir.join("trace.csv");
    fs::write(&path, trace.to_csv(indices))
        .map_err(|e| Error::io(&path, e))
        .at(Stage::Output)?;
    Ok(path)
}

/// One axis of a sweep grid: a dotted config key and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<GridValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridValue {
    Literal(toml::Value),
    /// Multiplies the base config's value.
    Scale(f64),
}

impl GridValue {
    fn label(&self) -> String {
        match self {
            GridValue::Literal(v) => v.to_string(),
            GridValue::Scale(k) => format!("*{k}"),
        }
    }
}

/// Parses `key=v1,v2;key2=a..b`. Values may be TOML literals, integer
/// ranges (`a..b` half-open, `a..=b` inclusive) or multipliers of the base
/// value (`*0.5`).
pub fn parse_grid(spec: &str) -> std::result::Result<Vec<GridAxis>, String> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| format!("grid axis `{part}` is not key=values"))?;
        let mut values = Vec::new();
        for v in vals.split(',').map(str::trim) {
            if let Some(k) = v.strip_prefix('*') {
                let k: f64 = k.parse().map_err(|_| format!("bad multiplier `{v}`"))?;
                values.push(GridValue::Scale(k));
            } else if let Some((a, b)) = v.split_once("..") {
                let (b, inclusive) = match b.strip_prefix('=') {
                    Some(b) => (b, true),
                    None => (b, false),
                };
                let a: i64 = a.parse().map_err(|_| format!("bad range `{v}`"))?;
                let b: i64 = b.parse().map_err(|_| format!("bad range `{v}`"))?;
                let end = if inclusive { b + 1 } else { b };
                values.extend((a..end).map(|i| GridValue::Literal(toml::Value::Integer(i))));
            } else {
                let lit: toml::Value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                    .map_err(|_| format!("bad value `{v}`"))?
                    .remove("v")
                    .expect("parsed key");
                values.push(GridValue::Literal(lit));
            }
        }
        if values.is_empty() {
            return Err(format!("grid axis `{key}` has no values"));
        }
        axes.push(GridAxis {
            key: key.trim().to_string(),
            values,
        });
    }
    if axes.is_empty() {
        return Err("empty grid".into());
    }
    Ok(axes)
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<GridValue>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

fn lookup<'a>(
    root: &'a mut toml::Table,
    key: &str,
) -> std::result::Result<&'a mut toml::Value, String> {
    let mut parts = key.split('.').peekable();
    let mut table = root;
    loop {
        let part = parts.next().ok_or("empty key")?;
        if parts.peek().is_none() {
            return table
                .get_mut(part)
                .ok_or_else(|| format!("unknown or unset config key `{key}`"));
        }
        table = table
            .entry(part)
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| format!("`{part}` in `{key}` is not a section"))?;
    }
}

/// Applies one grid point to `base`.
pub fn apply_point(
    base: &RunConfig,
    axes: &[GridAxis],
    point: &[GridValue],
) -> std::result::Result<RunConfig, String> {
    let mut table: toml::Table = toml::from_str(&base.to_toml()).map_err(|e| e.to_string())?;
    // material overrides default to the shipped values when not set
    let defaults: toml::Table =
        toml::from_str(&crate::magnet::MaterialParams::default().to_toml()).expect("defaults");
    for (axis, value) in axes.iter().zip(point) {
        if let Some(field) = axis.key.strip_prefix("material.") {
            let mat = table
                .entry("material")
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .ok_or("material is not a section")?;
            if !mat.contains_key(field) {
                let d = defaults
                    .get(field)
                    .ok_or_else(|| format!("unknown material key `{field}`"))?;
                mat.insert(field.to_string(), d.clone());
            }
        }
        let slot = lookup(&mut table, &axis.key)?;
        *slot = match value {
            GridValue::Literal(v) => match (&*slot, v) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
                _ => v.clone(),
            },
            GridValue::Scale(k) => match &*slot {
                toml::Value::Float(f) => toml::Value::Float(f * k),
                toml::Value::Integer(i) => toml::Value::Float(*i as f64 * k),
                other => return Err(format!("cannot scale non-numeric `{}` = {other}", axis.key)),
            },
        };
    }
    let mut cfg = RunConfig::from_toml(&toml::to_string(&table).map_err(|e| e.to_string())?)?;
    cfg.base_dir = base.base_dir.clone();
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub params: Vec<String>,
    pub outcome: std::result::Result<SweepScores, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepScores {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub coupling_ratio: Option<f64>,
}

fn run_point(
    base: &RunConfig,
    axes: &[GridAxis],
    point: &[GridValue],
) -> std::result::Result<SweepScores, String> {
    let cfg = apply_point(base, axes, point)?;
    let ratio = match cfg.reservoir {
        ReservoirKind::Nanomagnet => {
            let layout = cfg.load_layout().map_err(|e| e.to_string())?;
            Some(
                calibrate_coupling(&layout, &cfg.material_params())
                    .map_err(|e| e.to_string())?
                    .ratio,
            )
        }
        ReservoirKind::Esn => None,
    };
    let exp = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
    Ok(SweepScores {
        train_accuracy: exp.outcome.scores.train_accuracy,
        test_accuracy: exp.outcome.scores.test_accuracy,
        coupling_ratio: ratio,
    })
}

/// Runs every grid point (up to `workers` at a time) and returns one row
/// per point in grid order. A failing point is recorded, not fatal.
pub fn run_sweep(base: &RunConfig, axes: &[GridAxis], workers: usize) -> CmdResult<Vec<SweepRow>> {
    let points = grid_points(axes);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(e.to_string()))
        .at(Stage::Config)?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| SweepRow {
                point: i,
                params: p.iter().map(GridValue::label).collect(),
                outcome: run_point(base, axes, p),
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

pub fn sweep_csv(axes: &[GridAxis], rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["point".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "status",
            "train_accuracy",
            "test_accuracy",
            "coupling_ratio",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        let mut rec = vec![r.point.to_string()];
        rec.extend(r.params.iter().cloned());
        match &r.outcome {
            Ok(s) => rec.extend([
                "ok".into(),
                s.train_accuracy.to_string(),
                s.test_accuracy.to_string(),
                s.coupling_ratio.map(|v| v.to_string()).unwrap_or_default(),
                String::new(),
            ]),
            Err(e) => rec.extend([
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ]),
        }
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// `sweep`: writes `summary.csv` and the base config into the output
/// directory. Returns the rows so callers can decide the exit status.
pub fn cmd_sweep(
    config: &Path,
    grid: &str,
    workers: usize,
    out: Option<&Path>,
) -> CmdResult<(Vec<SweepRow>, PathBuf)> {
    let base = load_config(config, out)?;
    let axes = parse_grid(grid)
        .map_err(Error::InvalidParams)
        .at(Stage::Config)?;
    let rows = run_sweep(&base, &axes, workers)?;
    let dir = base.resolved_output_dir();
    fs::create_dir_all(&dir)
        .map_err(|e| Error::io(&dir, e))
        .at(Stage::Output)?;
    let path = dir.join("summary.csv");
    fs::write(&path, sweep_csv(&axes, &rows))
        .map_err(|e| Error::io(&path, e))
        .at(Stage::Output)?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, base.resolved().to_toml())
        .map_err(|e| Error::io(&cfg_path, e))
        .at(Stage::Output)?;
    Ok((rows, path))
}
