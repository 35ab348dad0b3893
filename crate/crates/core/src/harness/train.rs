//! One seeded training run.

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::data::SplitData;
use super::rng::{stream, Purpose};
use super::{HarnessError, HarnessResult};
use crate::activation::ActivationKind;
use crate::error::Error;
use crate::metrics::{HardnessProfile, MetricDirection, RunRecord};
use crate::network::{accuracy, batch_cross_entropy, NetworkState};
use crate::optim::Optimizer;
use crate::reparam::init_profile;
use crate::schedule::{AnnealPlan, Checkpoint, Phase};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Parameters at the best validation epoch, `None` if no epoch finished.
    pub best: Option<Checkpoint>,
    pub final_network: NetworkState,
    pub plan: Option<AnnealPlan>,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.record.failure.is_some()
    }
}

/// Trains `cfg.training.epochs` epochs of shuffled minibatch SGD/AdamW on
/// cross-entropy and logs the validation accuracy, mean training loss and
/// hardness profile after every epoch.
///
/// A non-finite loss or parameter stops the run. The record then holds the
/// epochs completed so far and `failure` says what happened; this is still
/// `Ok`. Configuration problems are `Err`.
pub fn run_training(cfg: &TrainConfig, seed: u64, data: &SplitData) -> HarnessResult<RunOutcome> {
    cfg.validate()?;
    let sizes = &cfg.model.layer_sizes;
    let activation = cfg.model.activation;
    let learnable = activation == ActivationKind::LambdaGelu;
    if sizes[0] != data.train.features() {
        return Err(HarnessError::Config(format!(
            "model.layer_sizes starts with {} but the dataset has {} features",
            sizes[0],
            data.train.features()
        )));
    }
    let out = *sizes.last().expect("validated");
    if out < data.train.classes {
        return Err(HarnessError::Config(format!(
            "model.layer_sizes ends with {out} but the dataset has {} classes",
            data.train.classes
        )));
    }
    if cfg.anneal.is_some() && !learnable {
        return Err(HarnessError::Config(format!(
            "annealing needs activation = \"lambda_gelu\", got \"{activation}\""
        )));
    }

    let hidden = sizes.len() - 2;
    let hardness = init_profile(cfg.hardness.init_mode, hidden, cfg.hardness.t, cfg.hardness.uniform_delta)?;
    let mut net = NetworkState::new(sizes, activation, hardness, &mut stream(seed, Purpose::Init))?;
    if !learnable {
        for p in net.hardness_mut() {
            p.freeze();
        }
    }
    let mut plan = match &cfg.anneal {
        Some(a) => Some(a.plan(cfg.training.epochs)?),
        None => None,
    };
    let mut opt = Optimizer::new(cfg.optimizer.clone())?;
    let mut shuffle = stream(seed, Purpose::Shuffle);

    let direction = cfg.training.metric_direction;
    let mut record = RunRecord {
        seed,
        activation,
        init_mode: learnable.then_some(cfg.hardness.init_mode),
        t: cfg.hardness.t,
        c: cfg.optimizer.multiplier_c,
        metric_direction: direction,
        profiles: Vec::new(),
        val_curve: Vec::new(),
        train_loss: Vec::new(),
        phases: Vec::new(),
        switch_epoch: plan.as_ref().map(|p| p.switch_epoch()),
        failure: None,
    };
    let mut best: Option<Checkpoint> = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let (val_x, val_y) = (&data.val.x, &data.val.y);

    for epoch in 1..=cfg.training.epochs {
        let phase = match plan.as_mut() {
            Some(p) => p.apply_phase(&mut net, epoch)?,
            None if learnable => Phase::Learnable,
            None => Phase::Fixed,
        };
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut diverged = None;
        for batch in order.chunks(cfg.training.batch_size) {
            let (x, y) = data.train.gather(batch);
            let (logits, cache) = net.forward_batch(&x)?;
            let (loss, dlogits) = batch_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                diverged = Some(format!("epoch {epoch}: training loss is {loss}"));
                break;
            }
            let grads = net.backward(&cache, &dlogits)?;
            match opt.step(&mut net, &grads) {
                Ok(()) => {}
                Err(Error::NonFinite(m)) => {
                    diverged = Some(format!("epoch {epoch}: {m}"));
                    break;
                }
                Err(e) => return Err(e.into()),
            }
            loss_sum += loss * batch.len() as f64;
        }
        if let Some(msg) = diverged {
            record.failure = Some(msg);
            break;
        }

        let val = accuracy(&net.predict(val_x)?, val_y);
        record.val_curve.push(val);
        record.train_loss.push(loss_sum / data.train.len() as f64);
        record.phases.push(phase);
        if learnable {
            record.profiles.push(HardnessProfile {
                epoch,
                lambdas: net.lambda_profile(),
            });
        }
        let improved = match &best {
            None => true,
            Some(b) => {
                let prev = record.val_curve[b.epoch - 1];
                match direction {
                    MetricDirection::HigherBetter => val > prev,
                    MetricDirection::LowerBetter => val < prev,
                }
            }
        };
        if improved {
            best = Some(Checkpoint {
                epoch,
                phase,
                network: net.clone(),
            });
        }
    }

    Ok(RunOutcome {
        record,
        best,
        final_network: net,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{AnnealConfig, DatasetSpec};
    use crate::harness::data::load_dataset;
    use crate::metrics::{best_validation, drift_v_lambda};
    use crate::reparam::InitMode;

    fn small() -> (TrainConfig, SplitData) {
        let mut cfg = TrainConfig::desk_moons();
        cfg.dataset = DatasetSpec::moons(120, 0.2, 3);
        cfg.model.layer_sizes = vec![2, 8, 8, 2];
        cfg.training.epochs = 6;
        cfg.training.batch_size = 16;
        cfg.optimizer.multiplier_c = 5.0;
        cfg.hardness.init_mode = InitMode::Increasing;
        let data = load_dataset(&cfg.dataset, cfg.training.val_fraction).unwrap();
        (cfg, data)
    }

    #[test]
    fn logs_one_entry_per_epoch() {
        let (cfg, data) = small();
        let out = run_training(&cfg, 1, &data).unwrap();
        let r = &out.record;
        assert!(r.failure.is_none());
        assert_eq!(r.val_curve.len(), 6);
        assert_eq!(r.train_loss.len(), 6);
        assert_eq!(r.profiles.len(), 6);
        assert_eq!(r.num_layers(), 2);
        assert!(r.phases.iter().all(|&p| p == Phase::Learnable));
        assert_eq!(r.init_mode, Some(InitMode::Increasing));
        let best = out.best.unwrap();
        assert_eq!(best.epoch, best_validation(r).unwrap().1);
        assert!(drift_v_lambda(r).unwrap() > 0.0);
    }

    #[test]
    fn same_seed_same_record() {
        let (cfg, data) = small();
        let a = run_training(&cfg, 4, &data).unwrap();
        let b = run_training(&cfg, 4, &data).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.final_network, b.final_network);
        let c = run_training(&cfg, 5, &data).unwrap();
        assert_ne!(a.record.val_curve, c.record.val_curve);
    }

    #[test]
    fn relu_run_has_no_profiles() {
        let (mut cfg, data) = small();
        cfg.model.activation = ActivationKind::Relu;
        let out = run_training(&cfg, 0, &data).unwrap();
        assert!(out.record.failure.is_none());
        assert!(out.record.profiles.is_empty());
        assert_eq!(out.record.init_mode, None);
        assert_eq!(out.record.val_curve.len(), 6);
        assert!(out.record.phases.iter().all(|&p| p == Phase::Fixed));
    }

    #[test]
    fn zero_rate_keeps_profile_constant() {
        let (mut cfg, data) = small();
        cfg.hardness.init_mode = InitMode::Uniform;
        cfg.optimizer.multiplier_c = 0.0;
        let out = run_training(&cfg, 2, &data).unwrap();
        let first = &out.record.profiles[0].lambdas;
        assert!(out.record.profiles.iter().all(|p| &p.lambdas == first));
        assert_eq!(drift_v_lambda(&out.record).unwrap(), 0.0);
    }

    #[test]
    fn annealed_run_ends_on_target() {
        let (mut cfg, data) = small();
        cfg.training.epochs = 8;
        cfg.anneal = Some(AnnealConfig::default());
        let out = run_training(&cfg, 0, &data).unwrap();
        let r = &out.record;
        assert_eq!(r.switch_epoch, Some(2));
        assert_eq!(r.phases[1], Phase::Learnable);
        assert_eq!(r.phases[2], Phase::Annealed);
        let target = cfg.anneal.as_ref().unwrap().target().unwrap();
        assert!(r.profiles[7].lambdas.iter().all(|&l| l == target));
        let s: Vec<f64> = out.final_network.hardness().map(|p| p.s()).collect();
        assert!(out.final_network.hardness().all(|p| p.is_frozen()));
        let captured = out.plan.unwrap().captured_lambdas().unwrap().to_vec();
        assert_eq!(captured, r.profiles[1].lambdas);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn divergence_gives_partial_record() {
        let (mut cfg, data) = small();
        cfg.optimizer.lr_weights = 1e300;
        let out = run_training(&cfg, 0, &data).unwrap();
        let msg = out.record.failure.clone().expect("should diverge");
        assert!(msg.starts_with("epoch 1"), "{msg}");
        assert!(out.record.val_curve.is_empty());
        assert!(out.best.is_none());
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let (mut cfg, data) = small();
        cfg.model.layer_sizes = vec![3, 8, 2];
        assert_eq!(run_training(&cfg, 0, &data).unwrap_err().exit_code(), 1);
        let (mut cfg, data) = small();
        cfg.model.activation = ActivationKind::Gelu;
        cfg.anneal = Some(AnnealConfig::default());
        assert_eq!(run_training(&cfg, 0, &data).unwrap_err().exit_code(), 1);
    }
}
