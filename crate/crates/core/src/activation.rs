//! The λ-GELU family `x·Φ(λx)` with its two partial derivatives, the GELU and
//! ReLU baselines, and whole-network activation substitution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{normal_cdf, normal_pdf};
use crate::network::NetworkState;

/// Which nonlinearity every hidden layer of a network applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    /// `x·Φ(λx)` with the layer's own hardness.
    LambdaGelu,
    /// `x·Φ(x)`, i.e. λ-GELU pinned at `λ = 1`.
    Gelu,
    Relu,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::LambdaGelu => "lambda_gelu",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Relu => "relu",
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 1.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("hardness must be >= 1, got {lambda}")))
    }
}

/// `x·Φ(λx)`.
pub fn lambda_gelu(x: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda_gelu_unchecked(x, lambda))
}

/// `∂/∂x [x·Φ(λx)] = Φ(λx) + λx·φ(λx)`.
pub fn lambda_gelu_dx(x: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda_gelu_dx_unchecked(x, lambda))
}

/// `∂/∂λ [x·Φ(λx)] = x²·φ(λx)`, never negative.
pub fn lambda_gelu_dlambda(x: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda_gelu_dlambda_unchecked(x, lambda))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
pub(crate) fn lambda_gelu_unchecked(x: f64, lambda: f64) -> f64 {
    x * normal_cdf(lambda * x)
}

#[inline]
pub(crate) fn lambda_gelu_dx_unchecked(x: f64, lambda: f64) -> f64 {
    let z = lambda * x;
    normal_cdf(z) + z * normal_pdf(z)
}

#[inline]
pub(crate) fn lambda_gelu_dlambda_unchecked(x: f64, lambda: f64) -> f64 {
    x * x * normal_pdf(lambda * x)
}

/// Applies `kind` element-wise; `lambda` is the layer's shared hardness and is
/// ignored by GELU and ReLU.
pub(crate) fn activate(kind: ActivationKind, lambda: f64, xs: &[f64], out: &mut [f64]) {
    match kind {
        ActivationKind::LambdaGelu => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = lambda_gelu_unchecked(x, lambda);
            }
        }
        ActivationKind::Gelu => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = lambda_gelu_unchecked(x, 1.0);
            }
        }
        ActivationKind::Relu => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = relu(x);
            }
        }
    }
}

/// Input derivative of `kind` at `x`. ReLU uses the subgradient 0 at the kink.
#[inline]
pub(crate) fn activation_dx(kind: ActivationKind, lambda: f64, x: f64) -> f64 {
    match kind {
        ActivationKind::LambdaGelu => lambda_gelu_dx_unchecked(x, lambda),
        ActivationKind::Gelu => lambda_gelu_dx_unchecked(x, 1.0),
        ActivationKind::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Returns a copy of `network` whose hidden layers all apply `target`.
/// Weights, biases and hardness parameters are carried over untouched.
pub fn substitute_activation(network: &NetworkState, target: ActivationKind) -> NetworkState {
    let mut swapped = network.clone();
    swapped.activation = target;
    swapped
}
