//! Deterministic hardening: hardness is learned up to a switch epoch, then
//! every layer's `s` is frozen and its λ is driven linearly from the value it
//! had at the switch to a common target, reached exactly at the last epoch.
//! After training the best checkpoint is evaluated as-is and again with every
//! activation replaced by ReLU.

use serde::{Deserialize, Serialize};

use crate::activation::{substitute_activation, ActivationKind};
use crate::error::{Error, Result};
use crate::gate::lambda_target_for;
use crate::metrics::{best_validation, RunRecord};
use crate::network::{accuracy, Matrix, NetworkState};

/// Default fraction of training spent with learnable hardness.
pub const DEFAULT_SWITCH_FRACTION: f64 = 0.25;

/// Default gate tolerance used to derive the annealing target.
pub const DEFAULT_EPSILON: f64 = 5e-3;

/// Training phase of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Hardness follows `s` and is trained.
    Learnable,
    /// `s` frozen, λ set by the schedule.
    Annealed,
    /// The activation has no hardness (GELU or ReLU runs).
    Fixed,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Learnable => "learnable",
            Phase::Annealed => "annealed",
            Phase::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealPlan {
    total_epochs: usize,
    switch_epoch: usize,
    lambda_target: f64,
    captured: Option<Vec<f64>>,
}

impl AnnealPlan {
    /// Plan with the switch at `⌊switch_fraction · T⌋`.
    pub fn new(total_epochs: usize, switch_fraction: f64, lambda_target: f64) -> Result<Self> {
        if !(switch_fraction > 0.0 && switch_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "switch fraction must lie in (0, 1), got {switch_fraction}"
            )));
        }
        let switch = (switch_fraction * total_epochs as f64).floor() as usize;
        Self::with_switch_epoch(total_epochs, switch, lambda_target)
    }

    pub fn with_switch_epoch(total_epochs: usize, switch_epoch: usize, lambda_target: f64) -> Result<Self> {
        if switch_epoch < 1 || switch_epoch >= total_epochs {
            return Err(Error::Domain(format!(
                "switch epoch must satisfy 1 <= e_s < T, got e_s={switch_epoch}, T={total_epochs}"
            )));
        }
        if !(lambda_target > 1.0) || !lambda_target.is_finite() {
            return Err(Error::Domain(format!("annealing target must be > 1, got {lambda_target}")));
        }
        Ok(Self {
            total_epochs,
            switch_epoch,
            lambda_target,
            captured: None,
        })
    }

    /// Defaults: switch at 25 % of training, target from a 5e-3 gate error.
    pub fn with_defaults(total_epochs: usize) -> Result<Self> {
        Self::new(total_epochs, DEFAULT_SWITCH_FRACTION, lambda_target_for(DEFAULT_EPSILON)?)
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    pub fn switch_epoch(&self) -> usize {
        self.switch_epoch
    }

    pub fn lambda_target(&self) -> f64 {
        self.lambda_target
    }

    pub fn captured_lambdas(&self) -> Option<&[f64]> {
        self.captured.as_deref()
    }

    pub fn phase(&self, epoch: usize) -> Phase {
        if epoch <= self.switch_epoch {
            Phase::Learnable
        } else {
            Phase::Annealed
        }
    }

    /// Scheduled hardness of `layer` at `epoch`, for `e_s < epoch <= T`.
    pub fn lambda_at(&self, layer: usize, epoch: usize) -> Result<f64> {
        let captured = self
            .captured
            .as_ref()
            .ok_or_else(|| Error::Schedule("no hardness captured yet".into()))?;
        if epoch <= self.switch_epoch || epoch > self.total_epochs {
            return Err(Error::Schedule(format!(
                "epoch {epoch} outside the annealing window ({}, {}]",
                self.switch_epoch, self.total_epochs
            )));
        }
        let start = *captured
            .get(layer)
            .ok_or_else(|| Error::Schedule(format!("layer {layer} not captured")))?;
        let w = (epoch - self.switch_epoch) as f64 / (self.total_epochs - self.switch_epoch) as f64;
        // convex form: w = 1 yields the target bit-for-bit
        Ok((1.0 - w) * start + w * self.lambda_target)
    }

    /// Sets up `net` for `epoch` (1-based). Call once at the start of every
    /// epoch. The first annealed epoch captures the learned profile and
    /// freezes every hardness variable.
    pub fn apply_phase(&mut self, net: &mut NetworkState, epoch: usize) -> Result<Phase> {
        if epoch <= self.switch_epoch {
            for p in net.hardness_mut() {
                p.unfreeze();
            }
            return Ok(Phase::Learnable);
        }
        if self.captured.is_none() {
            self.captured = Some(net.hardness().map(|p| p.lambda_of()).collect());
        }
        let lambdas = (0..net.num_hidden())
            .map(|l| self.lambda_at(l, epoch))
            .collect::<Result<Vec<_>>>()?;
        for (p, lam) in net.hardness_mut().zip(lambdas) {
            p.freeze();
            p.set_scheduled(lam)?;
        }
        Ok(Phase::Annealed)
    }
}

/// Parameters saved at a run's best validation epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub phase: Phase,
    pub network: NetworkState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionResult {
    pub epoch: usize,
    pub phase: Phase,
    pub original: f64,
    pub substituted: f64,
}

impl SubstitutionResult {
    /// `original - substituted`; positive means the swap hurt.
    pub fn gap(&self) -> f64 {
        self.original - self.substituted
    }
}

/// Evaluates the best checkpoint with its own activation and again after a
/// swap to ReLU, on the same validation data, with no parameter updates.
pub fn evaluate_substitution(
    run: &RunRecord,
    checkpoint: Option<&Checkpoint>,
    val_x: &Matrix,
    val_y: &[usize],
) -> Result<SubstitutionResult> {
    let ckpt = checkpoint.ok_or_else(|| Error::Schedule("run has no checkpoint".into()))?;
    let (_, best_epoch) = best_validation(run)?;
    if best_epoch != ckpt.epoch {
        return Err(Error::Schedule(format!(
            "checkpoint is from epoch {} but the best validation epoch is {best_epoch}",
            ckpt.epoch
        )));
    }
    let original = accuracy(&ckpt.network.predict(val_x)?, val_y);
    let swapped = substitute_activation(&ckpt.network, ActivationKind::Relu);
    let substituted = accuracy(&swapped.predict(val_x)?, val_y);
    Ok(SubstitutionResult {
        epoch: ckpt.epoch,
        phase: ckpt.phase,
        original,
        substituted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reparam::{init_profile, InitMode};
    use rand::SeedableRng;

    fn plan_with(captured: Vec<f64>, total: usize, switch: usize, target: f64) -> AnnealPlan {
        let mut p = AnnealPlan::with_switch_epoch(total, switch, target).unwrap();
        p.captured = Some(captured);
        p
    }

    fn small_net() -> NetworkState {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = init_profile(InitMode::Increasing, 3, 0.1, 1e-4).unwrap();
        NetworkState::new(&[2, 4, 4, 4, 2], ActivationKind::LambdaGelu, h, &mut rng).unwrap()
    }

    #[test]
    fn construction_rules() {
        let p = AnnealPlan::new(100, 0.25, 160.0).unwrap();
        assert_eq!(p.switch_epoch(), 25);
        assert_eq!(AnnealPlan::new(10, 0.25, 160.0).unwrap().switch_epoch(), 2);
        assert!(AnnealPlan::new(3, 0.25, 160.0).is_err());
        assert!(AnnealPlan::with_switch_epoch(10, 10, 160.0).is_err());
        assert!(AnnealPlan::with_switch_epoch(10, 3, 1.0).is_err());
        let d = AnnealPlan::with_defaults(40).unwrap();
        assert_eq!(d.switch_epoch(), 10);
        assert!((d.lambda_target() - 159.577).abs() < 1e-3);
    }

    #[test]
    fn endpoint_and_midpoint() {
        let p = plan_with(vec![1.37, 2.0, 17.25], 12, 4, 159.577_2);
        for l in 0..3 {
            assert_eq!(p.lambda_at(l, 12).unwrap().to_bits(), 159.577_2f64.to_bits());
            let start = p.captured_lambdas().unwrap()[l];
            assert_eq!(p.lambda_at(l, 8).unwrap(), (start + 159.577_2) / 2.0);
        }
    }

    #[test]
    fn arithmetic_example() {
        let p = plan_with(vec![2.0], 80, 5, 160.0);
        assert!((p.lambda_at(0, 20).unwrap() - 33.6).abs() < 1e-12);
    }

    #[test]
    fn out_of_window_queries_fail() {
        let p = AnnealPlan::with_switch_epoch(12, 3, 50.0).unwrap();
        assert!(p.lambda_at(0, 5).is_err());
        let p = plan_with(vec![1.5], 12, 3, 50.0);
        assert!(p.lambda_at(0, 3).is_err());
        assert!(p.lambda_at(0, 13).is_err());
        assert!(p.lambda_at(1, 5).is_err());
    }

    #[test]
    fn schedule_is_strictly_increasing_toward_a_higher_target() {
        let p = plan_with(vec![1.0001, 1.5, 2.0], 40, 10, 159.6);
        for l in 0..3 {
            let seq: Vec<f64> = (11..=40).map(|e| p.lambda_at(l, e).unwrap()).collect();
            assert!(seq.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn phases_freeze_and_capture() {
        let mut net = small_net();
        let mut plan = AnnealPlan::with_switch_epoch(12, 3, 159.6).unwrap();
        for e in 1..=3 {
            assert_eq!(plan.apply_phase(&mut net, e).unwrap(), Phase::Learnable);
            assert!(net.hardness().all(|p| !p.is_frozen()));
            for p in net.hardness_mut() {
                p.apply_update(0.01 * e as f64);
            }
        }
        let logged: Vec<f64> = net.lambda_profile();
        plan.apply_phase(&mut net, 4).unwrap();
        let captured: Vec<u64> = plan.captured_lambdas().unwrap().iter().map(|v| v.to_bits()).collect();
        assert_eq!(captured, logged.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let s_at_switch: Vec<u64> = net.hardness().map(|p| p.s().to_bits()).collect();
        for e in 4..=12 {
            plan.apply_phase(&mut net, e).unwrap();
            assert!(net.hardness().all(|p| p.is_frozen()));
            for p in net.hardness_mut() {
                p.apply_update(1.0);
            }
            let s_now: Vec<u64> = net.hardness().map(|p| p.s().to_bits()).collect();
            assert_eq!(s_now, s_at_switch);
        }
        assert!(net.lambda_profile().iter().all(|&l| l == 159.6));
    }

    fn record(curve: Vec<f64>) -> RunRecord {
        RunRecord::for_test(curve)
    }

    #[test]
    fn substitution_on_relu_network_is_lossless() {
        let mut net = small_net();
        net.activation = ActivationKind::Relu;
        let x = Matrix::from_vec(3, 2, vec![0.1, 0.9, -1.0, 0.3, 2.0, -0.5]).unwrap();
        let y = [0, 1, 1];
        let run = record(vec![0.2, 0.6, 0.4]);
        let ck = Checkpoint {
            epoch: 2,
            phase: Phase::Fixed,
            network: net,
        };
        let r = evaluate_substitution(&run, Some(&ck), &x, &y).unwrap();
        assert_eq!(r.original.to_bits(), r.substituted.to_bits());
        assert_eq!(r.epoch, 2);
    }

    #[test]
    fn substitution_requires_matching_checkpoint() {
        let net = small_net();
        let x = Matrix::from_vec(1, 2, vec![0.1, 0.9]).unwrap();
        let run = record(vec![0.2, 0.6, 0.4]);
        assert!(evaluate_substitution(&run, None, &x, &[0]).is_err());
        let ck = Checkpoint {
            epoch: 3,
            phase: Phase::Learnable,
            network: net,
        };
        assert!(evaluate_substitution(&run, Some(&ck), &x, &[0]).is_err());
    }
}
