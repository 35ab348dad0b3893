//! ReLU substitution study: a GELU baseline swapped directly, next to an
//! annealed λ-GELU run swapped after hardening.

use rayon::prelude::*;

use super::config::TrainConfig;
use super::data::SplitData;
use super::train::{run_training, RunOutcome};
use super::{HarnessError, HarnessResult};
use crate::activation::ActivationKind;
use crate::metrics::RunRecord;
use crate::schedule::{evaluate_substitution, SubstitutionResult};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub seed: u64,
    pub gelu: SubstitutionResult,
    pub annealed: SubstitutionResult,
}

/// Seed means of the four numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyMeans {
    pub gelu_original: f64,
    pub gelu_substituted: f64,
    pub annealed_original: f64,
    pub annealed_substituted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionStudy {
    pub rows: Vec<StudyRow>,
    pub mean: StudyMeans,
    pub lambda_target: f64,
    /// Per seed: the GELU run, then the annealed run.
    pub records: Vec<RunRecord>,
}

/// For every seed, trains a GELU network and an annealed λ-GELU network with
/// otherwise identical settings, then evaluates each best checkpoint before
/// and after swapping in ReLU. Uses `cfg.anneal`, or the default schedule
/// when it is absent.
pub fn run_substitution_study(cfg: &TrainConfig, data: &SplitData, jobs: usize) -> HarnessResult<SubstitutionStudy> {
    cfg.validate()?;
    let anneal = cfg.anneal.clone().unwrap_or_default();
    let lambda_target = anneal.target()?;

    let mut gelu = cfg.clone();
    gelu.model.activation = ActivationKind::Gelu;
    gelu.anneal = None;
    gelu.grid = None;
    let mut annealed = cfg.clone();
    annealed.model.activation = ActivationKind::LambdaGelu;
    annealed.anneal = Some(anneal);
    annealed.grid = None;

    let list: Vec<(&TrainConfig, u64)> = cfg
        .training
        .seeds
        .iter()
        .flat_map(|&s| [(&gelu, s), (&annealed, s)])
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    let outcomes: Vec<HarnessResult<RunOutcome>> =
        pool.install(|| list.par_iter().map(|(c, s)| run_training(c, *s, data)).collect());

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut outcomes = outcomes.into_iter();
    for &seed in &cfg.training.seeds {
        let g = outcomes.next().expect("two runs per seed")?;
        let a = outcomes.next().expect("two runs per seed")?;
        for (name, out) in [("gelu", &g), ("annealed", &a)] {
            if let Some(f) = &out.record.failure {
                return Err(HarnessError::Runtime(format!("{name} run, seed {seed}: {f}")));
            }
        }
        rows.push(StudyRow {
            seed,
            gelu: substitute(&g, data)?,
            annealed: substitute(&a, data)?,
        });
        records.push(g.record);
        records.push(a.record);
    }
    let n = rows.len() as f64;
    let mean_of = |f: &dyn Fn(&StudyRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean = StudyMeans {
        gelu_original: mean_of(&|r| r.gelu.original),
        gelu_substituted: mean_of(&|r| r.gelu.substituted),
        annealed_original: mean_of(&|r| r.annealed.original),
        annealed_substituted: mean_of(&|r| r.annealed.substituted),
    };
    Ok(SubstitutionStudy {
        rows,
        mean,
        lambda_target,
        records,
    })
}

fn substitute(out: &RunOutcome, data: &SplitData) -> HarnessResult<SubstitutionResult> {
    Ok(evaluate_substitution(
        &out.record,
        out.best.as_ref(),
        &data.val.x,
        &data.val.y,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::DatasetSpec;
    use crate::harness::data::load_dataset;

    fn tiny() -> (TrainConfig, SplitData) {
        let mut cfg = TrainConfig::desk_moons();
        cfg.dataset = DatasetSpec::moons(150, 0.15, 2);
        cfg.model.layer_sizes = vec![2, 8, 8, 2];
        cfg.training.epochs = 8;
        cfg.training.batch_size = 16;
        cfg.training.seeds = vec![0, 1];
        let data = load_dataset(&cfg.dataset, cfg.training.val_fraction).unwrap();
        (cfg, data)
    }

    #[test]
    fn four_columns_per_seed() {
        let (cfg, data) = tiny();
        let st = run_substitution_study(&cfg, &data, 2).unwrap();
        assert_eq!(st.rows.len(), 2);
        assert_eq!(st.records.len(), 4);
        assert_eq!(st.records[0].activation, ActivationKind::Gelu);
        assert_eq!(st.records[1].activation, ActivationKind::LambdaGelu);
        let m = (st.rows[0].gelu.original + st.rows[1].gelu.original) / 2.0;
        assert_eq!(st.mean.gelu_original, m);
        assert!((st.lambda_target - 159.577).abs() < 1e-3);
    }

    #[test]
    fn relu_control_has_zero_gap() {
        let (mut cfg, data) = tiny();
        cfg.model.activation = ActivationKind::Relu;
        let out = run_training(&cfg, 0, &data).unwrap();
        let r = substitute(&out, &data).unwrap();
        assert_eq!(r.original.to_bits(), r.substituted.to_bits());
    }
}
