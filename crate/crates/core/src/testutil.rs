//! Reference oracles shared by the unit tests. Nothing here calls into the
//! code under test.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Standard normal density written out directly.
pub fn phi_ref(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper normal tail `1 - Φ(u)` for `u >= 0` by quadrature of the density.
pub fn upper_tail_ref(u: f64) -> f64 {
    adaptive_simpson(&phi_ref, u, u + 40.0, 1e-15)
}

/// `Φ(z)` by quadrature of the density.
pub fn normal_cdf_ref(z: f64) -> f64 {
    if z >= 0.0 {
        0.5 + adaptive_simpson(&phi_ref, 0.0, z, 1e-15)
    } else {
        upper_tail_ref(-z)
    }
}

/// Central finite difference with step `h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Relative error with an absolute floor for values near zero.
pub fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs || diff <= rel * analytic.abs().max(numeric.abs())
}
