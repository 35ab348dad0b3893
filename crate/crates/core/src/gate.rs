//! Scalar special functions behind the gate `Φ(λx)` and the bound on how far
//! the smooth gate sits from the Heaviside step.
//!
//! Everything here is `f64`. At the hardened end of the schedule (`λ ≈ 160`)
//! the density `φ(λx)` is sharply peaked and single precision is not enough
//! for the gradient checks.

use crate::error::{Error, Result};

/// `1/√(2π)`, the peak of the standard normal density.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF `Φ(z)`.
///
/// Uses `½(1 + erf(z/√2))` on the right half-line and the equivalent
/// `½·erfc(-z/√2)` on the left, which keeps relative accuracy in the lower
/// tail where `1 + erf(·)` would cancel.
pub fn normal_cdf(z: f64) -> f64 {
    let w = z * std::f64::consts::FRAC_1_SQRT_2;
    if z >= 0.0 {
        0.5 * (1.0 + libm::erf(w))
    } else {
        0.5 * libm::erfc(-w)
    }
}

/// Standard normal density `φ(z)`.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `log(1 + e^z)` without overflow.
pub fn softplus_stable(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Global ℓ1 distance between the Heaviside gate and `Φ(λx)`:
/// `∫|H(x) - Φ(λx)| dx = 2 / (λ√(2π))`.
pub fn gate_l1_error(lambda: f64) -> Result<f64> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("gate hardness must be >= 1, got {lambda}")));
    }
    Ok(2.0 * INV_SQRT_2PI / lambda)
}

/// Smallest hardness whose global gate error is at most `epsilon`.
pub fn lambda_target_for(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("tolerance must be > 0, got {epsilon}")));
    }
    Ok(2.0 * INV_SQRT_2PI / epsilon)
}
