//! Constrained hardness: `λ(s) = 1 + softplus(s/t)` over an unconstrained
//! scalar `s`, the inverse map used to place initial profiles, and the three
//! depth-wise initialization modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{sigmoid, softplus_stable};

/// Default softplus temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Default offset above 1 used by [`InitMode::Uniform`].
pub const DEFAULT_UNIFORM_DELTA: f64 = 1e-4;

/// Smallest representable hardness. `1 + softplus(s/t)` rounds to exactly 1
/// once `softplus(s/t)` drops below half an ulp of 1; the clamp keeps the
/// `λ > 1` constraint true in floating point.
const LAMBDA_FLOOR: f64 = 1.0 + f64::EPSILON;

/// One layer's hardness variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessParam {
    s: f64,
    t: f64,
    frozen: bool,
    /// Hardness imposed by the annealing schedule while frozen.
    scheduled: Option<f64>,
}

impl HardnessParam {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("temperature must be > 0, got {t}")));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("hardness variable s = {s}")));
        }
        Ok(Self {
            s,
            t,
            frozen: false,
            scheduled: None,
        })
    }

    /// Parameter whose `lambda_of` equals `lambda` (to rounding).
    pub fn from_lambda(lambda: f64, t: f64) -> Result<Self> {
        Self::new(s_for_lambda(lambda, t)?, t)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// `1 + softplus(s/t)`, always from `s`.
    pub fn lambda_of(&self) -> f64 {
        (1.0 + softplus_stable(self.s / self.t)).max(LAMBDA_FLOOR)
    }

    /// `dλ/ds = σ(s/t)/t`.
    pub fn dlambda_ds(&self) -> f64 {
        sigmoid(self.s / self.t) / self.t
    }

    /// Hardness seen by the activation: the scheduled override when frozen,
    /// otherwise `lambda_of`.
    pub fn effective_lambda(&self) -> f64 {
        match self.scheduled {
            Some(l) if self.frozen => l,
            _ => self.lambda_of(),
        }
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
        self.scheduled = None;
    }

    /// Pins the effective hardness. Only meaningful on a frozen parameter.
    pub fn set_scheduled(&mut self, lambda: f64) -> Result<()> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("scheduled hardness must be >= 1, got {lambda}")));
        }
        self.scheduled = Some(lambda);
        Ok(())
    }

    pub fn scheduled(&self) -> Option<f64> {
        self.scheduled
    }

    /// Moves `s` by `delta`. Ignored while frozen.
    pub fn apply_update(&mut self, delta: f64) {
        if !self.frozen {
            self.s += delta;
        }
    }

    #[cfg(test)]
    pub(crate) fn set_s_raw(&mut self, s: f64) {
        self.s = s;
    }

    pub(crate) fn from_raw(s: f64, t: f64, frozen: bool, scheduled: Option<f64>) -> Self {
        Self {
            s,
            t,
            frozen,
            scheduled,
        }
    }
}

/// `t·log(e^(λ-1) - 1)`, the inverse of `λ(s)`. Requires `λ > 1`.
pub fn s_for_lambda(lambda: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("temperature must be > 0, got {t}")));
    }
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "hardness must be strictly > 1 to invert the softplus map, got {lambda}"
        )));
    }
    let y = lambda - 1.0;
    // log(e^y - 1) = y + log(1 - e^-y); the two branches avoid overflow for
    // large y and cancellation for small y
    let inner = if y > 1.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    };
    Ok(t * inner)
}

/// How initial hardness is laid out across depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Every layer just above `λ = 1`.
    Uniform,
    /// From `1 + δ₀` at the first layer up to 2 at the last.
    Increasing,
    /// From 2 at the first layer down to `1 + δ₀` at the last.
    Decreasing,
}

impl InitMode {
    pub const ALL: [InitMode; 3] = [InitMode::Uniform, InitMode::Increasing, InitMode::Decreasing];

    pub fn name(self) -> &'static str {
        match self {
            InitMode::Uniform => "uniform",
            InitMode::Increasing => "increasing",
            InitMode::Decreasing => "decreasing",
        }
    }
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Target λ values for each layer under `mode`.
pub fn init_lambdas(mode: InitMode, num_layers: usize, uniform_delta: f64) -> Vec<f64> {
    let low = 1.0 + uniform_delta;
    let high = 2.0;
    let ramp = |i: usize| {
        if num_layers == 1 {
            low
        } else {
            low + (high - low) * i as f64 / (num_layers - 1) as f64
        }
    };
    match mode {
        InitMode::Uniform => vec![low; num_layers],
        InitMode::Increasing => (0..num_layers).map(ramp).collect(),
        InitMode::Decreasing => (0..num_layers).rev().map(ramp).collect(),
    }
}

/// One unfrozen [`HardnessParam`] per layer, laid out according to `mode`.
pub fn init_profile(
    mode: InitMode,
    num_layers: usize,
    t: f64,
    uniform_delta: f64,
) -> Result<Vec<HardnessParam>> {
    if num_layers == 0 {
        return Err(Error::Domain("need at least one hardness layer".into()));
    }
    if !(uniform_delta > 0.0) || uniform_delta >= 1.0 {
        return Err(Error::Domain(format!(
            "uniform offset must lie in (0, 1), got {uniform_delta}"
        )));
    }
    init_lambdas(mode, num_layers, uniform_delta)
        .into_iter()
        .map(|l| HardnessParam::from_lambda(l, t))
        .collect()
}
