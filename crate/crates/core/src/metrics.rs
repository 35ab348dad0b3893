//! Per-run records and the statistics computed from them: hardness drift,
//! cell averages over seeds and modes, best validation score, and rank
//! correlation between layerwise hardness profiles.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::reparam::InitMode;
use crate::schedule::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDirection {
    HigherBetter,
    LowerBetter,
}

/// Per-layer hardness at the end of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessProfile {
    pub epoch: usize,
    pub lambdas: Vec<f64>,
}

/// Everything logged by one training run, one entry per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub activation: ActivationKind,
    /// `None` for runs without learnable hardness.
    pub init_mode: Option<InitMode>,
    pub t: f64,
    pub c: f64,
    pub metric_direction: MetricDirection,
    pub profiles: Vec<HardnessProfile>,
    pub val_curve: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub phases: Vec<Phase>,
    pub switch_epoch: Option<usize>,
    /// Diagnostic for a run that stopped early.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn epochs(&self) -> usize {
        self.val_curve.len()
    }

    pub fn num_layers(&self) -> usize {
        self.profiles.first().map_or(0, |p| p.lambdas.len())
    }

    #[cfg(test)]
    pub(crate) fn for_test(curve: Vec<f64>) -> Self {
        let n = curve.len();
        Self {
            seed: 0,
            activation: ActivationKind::LambdaGelu,
            init_mode: Some(InitMode::Uniform),
            t: 0.1,
            c: 1.0,
            metric_direction: MetricDirection::HigherBetter,
            profiles: (1..=n)
                .map(|e| HardnessProfile {
                    epoch: e,
                    lambdas: vec![],
                })
                .collect(),
            val_curve: curve,
            train_loss: vec![0.0; n],
            phases: vec![Phase::Learnable; n],
            switch_epoch: None,
            failure: None,
        }
    }
}

/// `V_λ = (1/L) Σ_ℓ Σ_e |λ_ℓ(e+1) - λ_ℓ(e)|`.
pub fn drift_v_lambda(run: &RunRecord) -> Result<f64> {
    if run.profiles.len() < 2 {
        return Err(Error::Metric(format!(
            "drift needs at least 2 epochs, got {}",
            run.profiles.len()
        )));
    }
    let layers = run.num_layers();
    if layers == 0 {
        return Err(Error::Metric("run has no hardness layers".into()));
    }
    if run.profiles.iter().any(|p| p.lambdas.len() != layers) {
        return Err(Error::Metric("hardness profiles change length across epochs".into()));
    }
    let total: f64 = (0..layers)
        .map(|l| {
            run.profiles
                .windows(2)
                .map(|w| (w[1].lambdas[l] - w[0].lambdas[l]).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(total / layers as f64)
}

/// Mean of `V_λ` over every run of one `(t, c)` cell.
pub fn cell_average_drift(runs: &[RunRecord]) -> Result<f64> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Metric("no runs in cell".into()))?;
    if runs
        .iter()
        .any(|r| r.t.to_bits() != first.t.to_bits() || r.c.to_bits() != first.c.to_bits())
    {
        return Err(Error::Metric("runs in one cell must share (t, c)".into()));
    }
    let mut sum = 0.0;
    for r in runs {
        sum += drift_v_lambda(r)?;
    }
    Ok(sum / runs.len() as f64)
}

/// Best validation score and its 1-based epoch. Ties go to the earliest
/// epoch.
pub fn best_validation(run: &RunRecord) -> Result<(f64, usize)> {
    best_of_curve(&run.val_curve, run.metric_direction)
}

pub fn best_of_curve(curve: &[f64], direction: MetricDirection) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, &v) in curve.iter().enumerate() {
        let better = match (best, direction) {
            (None, _) => true,
            (Some((b, _)), MetricDirection::HigherBetter) => v > b,
            (Some((b, _)), MetricDirection::LowerBetter) => v < b,
        };
        if better {
            best = Some((v, i + 1));
        }
    }
    best.ok_or_else(|| Error::Metric("empty validation curve".into()))
}

/// Mean BVS of `cell_runs` minus mean BVS of `baseline_runs`.
pub fn delta_bvs(cell_runs: &[RunRecord], baseline_runs: &[RunRecord]) -> Result<f64> {
    Ok(mean_bvs(cell_runs)? - mean_bvs(baseline_runs)?)
}

pub fn mean_bvs(runs: &[RunRecord]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::Metric("no runs to average".into()));
    }
    let mut sum = 0.0;
    for r in runs {
        sum += best_validation(r)?.0;
    }
    Ok(sum / runs.len() as f64)
}

/// Average (1-based) ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation as the Pearson correlation of average ranks.
/// `Ok(None)` when either profile has all-equal ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!(
            "profile lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Metric("rank correlation needs at least 2 layers".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}

/// Seed-averaged correlation between two initialization modes at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePairRho {
    pub first: InitMode,
    pub second: InitMode,
    /// `None` when no seed gave a defined correlation.
    pub rho: Option<f64>,
    /// Seeds that contributed a defined value.
    pub defined_seeds: usize,
}

impl ModePairRho {
    pub fn label(&self) -> String {
        format!("{}-{}", self.first, self.second)
    }
}

/// For every unordered pair of modes present in `runs`, the mean over seeds
/// of the Spearman correlation between same-seed profiles at `epoch`
/// (1-based). Seeds whose correlation is undefined are left out of the mean.
pub fn rho_s_across_modes(runs: &[RunRecord], epoch: usize) -> Result<Vec<ModePairRho>> {
    let modes: Vec<InitMode> = InitMode::ALL
        .into_iter()
        .filter(|m| runs.iter().any(|r| r.init_mode == Some(*m)))
        .collect();
    let seeds_of = |m: InitMode| {
        let mut s: Vec<u64> = runs
            .iter()
            .filter(|r| r.init_mode == Some(m))
            .map(|r| r.seed)
            .collect();
        s.sort_unstable();
        s
    };
    let seeds = modes.first().map(|&m| seeds_of(m)).unwrap_or_default();
    for &m in &modes {
        let s = seeds_of(m);
        if s != seeds {
            return Err(Error::Metric(format!(
                "mode {m} has seeds {s:?}, expected {seeds:?}"
            )));
        }
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Metric(format!("mode {m} repeats a seed")));
        }
    }
    let profile = |m: InitMode, seed: u64| -> Result<&[f64]> {
        let run = runs
            .iter()
            .find(|r| r.init_mode == Some(m) && r.seed == seed)
            .expect("seed sets checked above");
        run.profiles
            .get(epoch.wrapping_sub(1))
            .map(|p| p.lambdas.as_slice())
            .ok_or_else(|| Error::Metric(format!("run has no profile for epoch {epoch}")))
    };
    let mut out = Vec::new();
    for (i, &m1) in modes.iter().enumerate() {
        for &m2 in &modes[i + 1..] {
            let mut sum = 0.0;
            let mut n = 0;
            for &seed in &seeds {
                if let Some(r) = spearman_rho(profile(m1, seed)?, profile(m2, seed)?)? {
                    sum += r;
                    n += 1;
                }
            }
            out.push(ModePairRho {
                first: m1,
                second: m2,
                rho: (n > 0).then(|| sum / n as f64),
                defined_seeds: n,
            });
        }
    }
    Ok(out)
}
