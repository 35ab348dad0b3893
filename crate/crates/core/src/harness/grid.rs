//! The `(t, c)` sweep: every cell trains each seed under each init mode, next
//! to a GELU baseline trained once per seed.

use rayon::prelude::*;

use super::config::TrainConfig;
use super::data::SplitData;
use super::train::run_training;
use super::{HarnessError, HarnessResult};
use crate::activation::ActivationKind;
use crate::metrics::{cell_average_drift, delta_bvs, rho_s_across_modes, RunRecord};
use crate::reparam::InitMode;

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub t: f64,
    pub c: f64,
    /// Cell-average `V_λ`; `None` when the cell failed.
    pub drift: Option<f64>,
    /// Mean BVS of the cell minus mean BVS of the baseline.
    pub delta_bvs: Option<f64>,
    pub runs: usize,
    pub failed_runs: usize,
    pub status: String,
}

/// Seed-averaged Spearman correlation between two init modes' profiles at
/// one epoch of one cell. `pair == "mean"` averages the defined pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub t: f64,
    pub c: f64,
    pub epoch: usize,
    pub pair: String,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub correlations: Vec<CorrelationRow>,
    /// Baseline runs first, then cells in `(t, c, seed, mode)` order.
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
struct Job {
    cfg: TrainConfig,
    seed: u64,
}

/// Record standing in for a run that could not start.
fn failed_record(job: &Job, message: String) -> RunRecord {
    let learnable = job.cfg.model.activation == ActivationKind::LambdaGelu;
    RunRecord {
        seed: job.seed,
        activation: job.cfg.model.activation,
        init_mode: learnable.then_some(job.cfg.hardness.init_mode),
        t: job.cfg.hardness.t,
        c: job.cfg.optimizer.multiplier_c,
        metric_direction: job.cfg.training.metric_direction,
        profiles: Vec::new(),
        val_curve: Vec::new(),
        train_loss: Vec::new(),
        phases: Vec::new(),
        switch_epoch: None,
        failure: Some(message),
    }
}

/// Runs independent jobs on a pool of `jobs` threads. Output order matches
/// input order whatever the scheduling.
fn run_jobs(list: &[Job], data: &SplitData, jobs: usize) -> HarnessResult<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        list.par_iter()
            .map(|job| match run_training(&job.cfg, job.seed, data) {
                Ok(out) => out.record,
                Err(e) => failed_record(job, e.to_string()),
            })
            .collect()
    }))
}

/// Trains the sweep in `cfg.grid` and summarizes it. Grid runs keep hardness
/// learnable for all epochs; `[anneal]` is ignored. A failing run marks its
/// cell failed and the sweep carries on.
pub fn run_grid(cfg: &TrainConfig, data: &SplitData, jobs: usize) -> HarnessResult<GridReport> {
    cfg.validate()?;
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| HarnessError::Config("the grid command needs a [grid] table".into()))?;

    let mut base = cfg.clone();
    base.anneal = None;
    base.grid = None;
    let mut list = Vec::new();
    for &seed in &cfg.training.seeds {
        let mut g = base.clone();
        g.model.activation = ActivationKind::Gelu;
        list.push(Job { cfg: g, seed });
    }
    for &t in &grid.t_values {
        for &c in &grid.c_values {
            for &seed in &cfg.training.seeds {
                for &mode in &grid.modes {
                    let mut g = base.clone();
                    g.model.activation = ActivationKind::LambdaGelu;
                    g.hardness.t = t;
                    g.optimizer.multiplier_c = c;
                    g.hardness.init_mode = mode;
                    list.push(Job { cfg: g, seed });
                }
            }
        }
    }
    let records = run_jobs(&list, data, jobs)?;
    let (rows, correlations) = summarize(&grid.t_values, &grid.c_values, &records);
    Ok(GridReport {
        rows,
        correlations,
        records,
    })
}

/// Distinct `(t, c)` pairs of the hardness-learning records, in first-seen
/// order.
pub fn cells_of(records: &[RunRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut ts: Vec<f64> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    for r in records.iter().filter(|r| r.activation == ActivationKind::LambdaGelu) {
        if !ts.iter().any(|t| t.to_bits() == r.t.to_bits()) {
            ts.push(r.t);
        }
        if !cs.iter().any(|c| c.to_bits() == r.c.to_bits()) {
            cs.push(r.c);
        }
    }
    (ts, cs)
}

/// Grid table and correlation curves from stored records. GELU records are
/// the baseline; λ-GELU records are grouped by bitwise `(t, c)`. One row per
/// `t × c` pair, even for cells with failures or no runs.
pub fn summarize(t_values: &[f64], c_values: &[f64], records: &[RunRecord]) -> (Vec<GridRow>, Vec<CorrelationRow>) {
    let baseline: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.activation == ActivationKind::Gelu)
        .cloned()
        .collect();
    let baseline_failure = baseline.iter().find_map(|r| r.failure.clone());
    let mut rows = Vec::new();
    let mut correlations = Vec::new();
    for &t in t_values {
        for &c in c_values {
            let runs: Vec<RunRecord> = records
                .iter()
                .filter(|r| {
                    r.activation == ActivationKind::LambdaGelu
                        && r.t.to_bits() == t.to_bits()
                        && r.c.to_bits() == c.to_bits()
                })
                .cloned()
                .collect();
            let failed: Vec<&RunRecord> = runs.iter().filter(|r| r.failure.is_some()).collect();
            let mut row = GridRow {
                t,
                c,
                drift: None,
                delta_bvs: None,
                runs: runs.len(),
                failed_runs: failed.len(),
                status: String::new(),
            };
            if runs.is_empty() {
                row.status = "failed: no runs".into();
                rows.push(row);
                continue;
            }
            if let Some(r) = failed.first() {
                row.status = format!(
                    "failed: seed {} {}: {}",
                    r.seed,
                    r.init_mode.map_or("-", |m| m.name()),
                    r.failure.as_deref().unwrap_or("")
                );
                rows.push(row);
                continue;
            }
            match cell_average_drift(&runs) {
                Ok(d) => row.drift = Some(d),
                Err(e) => {
                    row.status = format!("failed: {e}");
                    rows.push(row);
                    continue;
                }
            }
            row.status = if baseline.is_empty() {
                "ok; no baseline runs".into()
            } else if let Some(f) = &baseline_failure {
                format!("ok; baseline failed: {f}")
            } else {
                match delta_bvs(&runs, &baseline) {
                    Ok(d) => {
                        row.delta_bvs = Some(d);
                        "ok".into()
                    }
                    Err(e) => format!("ok; {e}"),
                }
            };
            correlations.extend(cell_correlations(t, c, &runs));
            rows.push(row);
        }
    }
    (rows, correlations)
}

fn cell_correlations(t: f64, c: f64, runs: &[RunRecord]) -> Vec<CorrelationRow> {
    let modes = InitMode::ALL
        .into_iter()
        .filter(|m| runs.iter().any(|r| r.init_mode == Some(*m)))
        .count();
    if modes < 2 {
        return Vec::new();
    }
    let epochs = runs.iter().map(|r| r.profiles.len()).min().unwrap_or(0);
    let mut out = Vec::new();
    for epoch in 1..=epochs {
        let Ok(pairs) = rho_s_across_modes(runs, epoch) else {
            return Vec::new();
        };
        let defined: Vec<f64> = pairs.iter().filter_map(|p| p.rho).collect();
        for p in &pairs {
            out.push(CorrelationRow {
                t,
                c,
                epoch,
                pair: p.label(),
                rho: p.rho,
            });
        }
        out.push(CorrelationRow {
            t,
            c,
            epoch,
            pair: "mean".into(),
            rho: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        });
    }
    out
}
