//! Output files. Floats are printed in Rust's shortest round-trip form, so
//! parsing a CSV cell gives back the exact `f64`.
//!
//! | file | columns |
//! |------|---------|
//! | `runs/<name>.csv` | `epoch, val_metric, loss, lambda_1..lambda_L, phase` |
//! | `grid.csv` | `t, c, drift, delta_bvs, runs, failed_runs, status` |
//! | `correlation.csv` | `t, c, epoch, mode_pair, rho` |
//! | `substitution.csv` | `seed, gelu_original, gelu_substituted, annealed_original, annealed_substituted` |
//! | `records.json` | every `RunRecord` |
//! | `manifest.json` | config echo, library version, one entry per run |

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::grid::{cells_of, summarize, CorrelationRow, GridRow};
use super::study::SubstitutionStudy;
use super::{HarnessError, HarnessResult};
use crate::activation::ActivationKind;
use crate::metrics::RunRecord;
use crate::reparam::InitMode;

pub const LIBRARY_NAME: &str = env!("CARGO_PKG_NAME");
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest text that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), fmt_f64)
}

fn csv_writer(path: &Path) -> HarnessResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> HarnessResult<()> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_run_csv(path: &Path, record: &RunRecord) -> HarnessResult<()> {
    let layers = record.num_layers();
    let mut w = csv_writer(path)?;
    let mut header = vec!["epoch".to_string(), "val_metric".into(), "loss".into()];
    header.extend((1..=layers).map(|l| format!("lambda_{l}")));
    header.push("phase".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for e in 0..record.epochs() {
        let mut row = vec![
            (e + 1).to_string(),
            fmt_f64(record.val_curve[e]),
            fmt_f64(record.train_loss[e]),
        ];
        if let Some(p) = record.profiles.get(e) {
            row.extend(p.lambdas.iter().map(|&l| fmt_f64(l)));
        }
        row.push(record.phases[e].name().to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> HarnessResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "c", "drift", "delta_bvs", "runs", "failed_runs", "status"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            fmt_f64(r.t),
            fmt_f64(r.c),
            fmt_opt(r.drift),
            fmt_opt(r.delta_bvs),
            r.runs.to_string(),
            r.failed_runs.to_string(),
            r.status.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_correlation_csv(path: &Path, rows: &[CorrelationRow]) -> HarnessResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "c", "epoch", "mode_pair", "rho"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            fmt_f64(r.t),
            fmt_f64(r.c),
            r.epoch.to_string(),
            r.pair.clone(),
            fmt_opt(r.rho),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_substitution_csv(path: &Path, study: &SubstitutionStudy) -> HarnessResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "seed",
        "gelu_original",
        "gelu_substituted",
        "annealed_original",
        "annealed_substituted",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in &study.rows {
        w.write_record([
            r.seed.to_string(),
            fmt_f64(r.gelu.original),
            fmt_f64(r.gelu.substituted),
            fmt_f64(r.annealed.original),
            fmt_f64(r.annealed.substituted),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    let m = &study.mean;
    w.write_record([
        "mean".to_string(),
        fmt_f64(m.gelu_original),
        fmt_f64(m.gelu_substituted),
        fmt_f64(m.annealed_original),
        fmt_f64(m.annealed_substituted),
    ])
    .map_err(|e| csv_err(path, e))?;
    finish(path, w)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> HarnessResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_records(path: &Path) -> HarnessResult<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// What changed relative to the manifest's config for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub file: String,
    pub seed: u64,
    pub activation: ActivationKind,
    pub init_mode: Option<InitMode>,
    pub t: f64,
    pub c: f64,
    pub annealed: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub command: String,
    pub config: TrainConfig,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn read(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// The exact config `run_training` was given for run `i`.
    pub fn run_config(&self, i: usize) -> Option<(TrainConfig, u64)> {
        let run = self.runs.get(i)?;
        let mut cfg = self.config.clone();
        cfg.grid = None;
        cfg.model.activation = run.activation;
        cfg.hardness.t = run.t;
        cfg.optimizer.multiplier_c = run.c;
        if let Some(m) = run.init_mode {
            cfg.hardness.init_mode = m;
        }
        if run.annealed {
            cfg.anneal = Some(cfg.anneal.clone().unwrap_or_default());
        } else {
            cfg.anneal = None;
        }
        Some((cfg, run.seed))
    }
}

fn run_file_name(r: &RunRecord) -> String {
    let mut name = r.activation.name().to_string();
    if r.activation == ActivationKind::LambdaGelu {
        if let Some(m) = r.init_mode {
            name.push('_');
            name.push_str(m.name());
        }
        name.push_str(&format!("_t{}_c{}", fmt_f64(r.t), fmt_f64(r.c)));
        if r.switch_epoch.is_some() {
            name.push_str("_annealed");
        }
    }
    name.push_str(&format!("_seed{}", r.seed));
    name
}

/// Writes every output file for `records` into `out_dir` and returns the
/// paths written. The grid and correlation tables are derived from the
/// records, over `config.grid`'s axes when present. Empty input still yields
/// header-only CSVs.
pub fn emit_reports(
    out_dir: &Path,
    command: &str,
    config: &TrainConfig,
    records: &[RunRecord],
    study: Option<&SubstitutionStudy>,
) -> HarnessResult<Vec<PathBuf>> {
    let runs_dir = out_dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| HarnessError::io(&runs_dir, e))?;
    let mut written = Vec::new();
    let mut used = HashSet::new();
    let mut manifest_runs = Vec::new();
    for r in records {
        let mut stem = run_file_name(r);
        let mut k = 1;
        while !used.insert(stem.clone()) {
            k += 1;
            stem = format!("{}_{k}", run_file_name(r));
        }
        let file = format!("runs/{stem}.csv");
        let path = out_dir.join(&file);
        write_run_csv(&path, r)?;
        written.push(path);
        manifest_runs.push(ManifestRun {
            file,
            seed: r.seed,
            activation: r.activation,
            init_mode: r.init_mode,
            t: r.t,
            c: r.c,
            annealed: r.switch_epoch.is_some(),
            failure: r.failure.clone(),
        });
    }

    let (rows, corr) = derive_tables(config, records);
    let grid_path = out_dir.join("grid.csv");
    write_grid_csv(&grid_path, &rows)?;
    written.push(grid_path);
    let corr_path = out_dir.join("correlation.csv");
    write_correlation_csv(&corr_path, &corr)?;
    written.push(corr_path);
    if let Some(st) = study {
        let p = out_dir.join("substitution.csv");
        write_substitution_csv(&p, st)?;
        written.push(p);
    }
    let rec_path = out_dir.join("records.json");
    write_json(&rec_path, &records)?;
    written.push(rec_path);
    let manifest = Manifest {
        library: LIBRARY_NAME.into(),
        version: LIBRARY_VERSION.into(),
        command: command.into(),
        config: config.clone(),
        runs: manifest_runs,
    };
    let man_path = out_dir.join("manifest.json");
    write_json(&man_path, &manifest)?;
    written.push(man_path);
    Ok(written)
}

/// Grid and correlation tables for a record set.
pub fn derive_tables(config: &TrainConfig, records: &[RunRecord]) -> (Vec<GridRow>, Vec<CorrelationRow>) {
    let (ts, cs) = match &config.grid {
        Some(g) => (g.t_values.clone(), g.c_values.clone()),
        None => cells_of(records),
    };
    summarize(&ts, &cs, records)
}

/// Re-derives `grid.csv` and `correlation.csv` in `out_dir` from its
/// `records.json` and `manifest.json`.
pub fn rederive(out_dir: &Path) -> HarnessResult<(Vec<GridRow>, Vec<CorrelationRow>)> {
    let manifest = Manifest::read(&out_dir.join("manifest.json"))?;
    let records = read_records(&out_dir.join("records.json"))?;
    let (rows, corr) = derive_tables(&manifest.config, &records);
    write_grid_csv(&out_dir.join("grid.csv"), &rows)?;
    write_correlation_csv(&out_dir.join("correlation.csv"), &corr)?;
    Ok((rows, corr))
}
