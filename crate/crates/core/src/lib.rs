//! Hardness-parameterized GELU activations `x·Φ(λx)`.
//!
//! The crate covers the activation family and its gradients, a constrained
//! learnable hardness `λ = 1 + softplus(s/t)`, a dense network with exact
//! reverse-mode gradients, SGD/AdamW with a separate hardness learning rate,
//! a linear hardening schedule that ends in a ReLU substitution test, the
//! drift / best-score / rank-correlation statistics, and an experiment
//! harness with a CLI (`lgelu`).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod checkpoint;
pub mod error;
pub mod gate;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod reparam;
pub mod schedule;

#[cfg(test)]
mod testutil;

pub use activation::{lambda_gelu, lambda_gelu_dlambda, lambda_gelu_dx, relu, substitute_activation, ActivationKind};
pub use error::{Error, Result};
pub use gate::{gate_l1_error, lambda_target_for, normal_cdf, normal_pdf, sigmoid, softplus_stable};
pub use metrics::{MetricDirection, RunRecord};
pub use network::{GradientSet, Matrix, NetworkState};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use reparam::{HardnessParam, InitMode};
pub use schedule::{AnnealPlan, Phase};
