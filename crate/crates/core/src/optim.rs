//! SGD and AdamW over three parameter groups:
//!
//! | group    | rate          | weight decay |
//! |----------|---------------|--------------|
//! | weights  | `η_w`         | yes          |
//! | biases   | `η_w`         | no           |
//! | hardness | `η_s = c·η_w` | no           |
//!
//! Frozen hardness variables are skipped entirely, including their moment
//! estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GradientSet, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[serde(rename = "adamw")]
    AdamW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_kind")]
    pub kind: OptimizerKind,
    /// `η_w`.
    #[serde(rename = "lr")]
    pub lr_weights: f64,
    /// `c` in `η_s = c·η_w`.
    #[serde(rename = "c", default = "default_c")]
    pub multiplier_c: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(rename = "beta1", default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(rename = "beta2", default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(rename = "eps", default = "default_eps")]
    pub adam_eps: f64,
}

fn default_kind() -> OptimizerKind {
    OptimizerKind::Sgd
}
fn default_c() -> f64 {
    1.0
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr_weights: 0.05,
            multiplier_c: 1.0,
            weight_decay: 0.0,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_eps(),
        }
    }
}

impl OptimizerConfig {
    /// `η_s = c·η_w`.
    pub fn lr_hardness(&self) -> f64 {
        self.multiplier_c * self.lr_weights
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Domain(format!("optimizer {what} = {v}")));
        if !(self.lr_weights > 0.0) || !self.lr_weights.is_finite() {
            return bad("lr", self.lr_weights);
        }
        // c = 0 is allowed: it switches hardness learning off
        if !(self.multiplier_c >= 0.0) || !self.multiplier_c.is_finite() {
            return bad("c", self.multiplier_c);
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return bad("weight_decay", self.weight_decay);
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return bad("beta1", self.adam_beta1);
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("beta2", self.adam_beta2);
        }
        if !(self.adam_eps > 0.0) {
            return bad("eps", self.adam_eps);
        }
        Ok(())
    }
}

/// Moment accumulators and the step counter. The moment buffers stay empty
/// under SGD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_bias: Vec<Vec<f64>>,
    v_bias: Vec<Vec<f64>>,
    m_s: Vec<f64>,
    v_s: Vec<f64>,
}

impl OptimizerState {
    fn ensure_shapes(&mut self, net: &NetworkState) {
        if !self.m_weights.is_empty() {
            return;
        }
        let w: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.weights.data.len()]).collect();
        let b: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect();
        self.m_weights = w.clone();
        self.v_weights = w;
        self.m_bias = b.clone();
        self.v_bias = b;
        self.m_s = vec![0.0; net.num_hidden()];
        self.v_s = vec![0.0; net.num_hidden()];
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub state: OptimizerState,
}

struct AdamCoeffs {
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
}

impl AdamCoeffs {
    fn update(&self, m: &mut f64, v: &mut f64, g: f64) -> f64 {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / self.bias1;
        let v_hat = *v / self.bias2;
        m_hat / (v_hat.sqrt() + self.eps)
    }
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: OptimizerState::default(),
        })
    }

    /// Applies one update to `net` from `grads`.
    pub fn step(&mut self, net: &mut NetworkState, grads: &GradientSet) -> Result<()> {
        check_shapes(net, grads)?;
        if !grads.all_finite() {
            return Err(Error::NonFinite(format!(
                "gradient at optimizer step {}",
                self.state.step + 1
            )));
        }
        self.state.step += 1;
        let lr = self.config.lr_weights;
        let lr_s = self.config.lr_hardness();
        let wd = self.config.weight_decay;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (i, layer) in net.layers_mut().iter_mut().enumerate() {
                    for (w, g) in layer.weights.data.iter_mut().zip(&grads.weights[i].data) {
                        *w -= lr * (g + wd * *w);
                    }
                    for (b, g) in layer.bias.iter_mut().zip(&grads.biases[i]) {
                        *b -= lr * g;
                    }
                    if let Some(p) = layer.hardness.as_mut() {
                        if !p.is_frozen() {
                            p.apply_update(-lr_s * grads.s[i]);
                        }
                    }
                }
            }
            OptimizerKind::AdamW => {
                self.state.ensure_shapes(net);
                let t = self.state.step as i32;
                let c = AdamCoeffs {
                    beta1: self.config.adam_beta1,
                    beta2: self.config.adam_beta2,
                    eps: self.config.adam_eps,
                    bias1: 1.0 - self.config.adam_beta1.powi(t),
                    bias2: 1.0 - self.config.adam_beta2.powi(t),
                };
                let st = &mut self.state;
                for (i, layer) in net.layers_mut().iter_mut().enumerate() {
                    let (mw, vw) = (&mut st.m_weights[i], &mut st.v_weights[i]);
                    for (k, (w, g)) in layer
                        .weights
                        .data
                        .iter_mut()
                        .zip(&grads.weights[i].data)
                        .enumerate()
                    {
                        *w *= 1.0 - lr * wd;
                        *w -= lr * c.update(&mut mw[k], &mut vw[k], *g);
                    }
                    let (mb, vb) = (&mut st.m_bias[i], &mut st.v_bias[i]);
                    for (k, (b, g)) in layer.bias.iter_mut().zip(&grads.biases[i]).enumerate() {
                        *b -= lr * c.update(&mut mb[k], &mut vb[k], *g);
                    }
                    if let Some(p) = layer.hardness.as_mut() {
                        if !p.is_frozen() {
                            let dir = c.update(&mut st.m_s[i], &mut st.v_s[i], grads.s[i]);
                            p.apply_update(-lr_s * dir);
                        }
                    }
                }
            }
        }
        if let Some(bad) = first_non_finite(net) {
            return Err(Error::NonFinite(format!(
                "{bad} after optimizer step {}",
                self.state.step
            )));
        }
        Ok(())
    }
}

fn check_shapes(net: &NetworkState, grads: &GradientSet) -> Result<()> {
    let mismatch = |expected, actual, context| Err(Error::Dimension { expected, actual, context });
    if grads.weights.len() != net.layers().len() || grads.biases.len() != net.layers().len() {
        return mismatch(net.layers().len(), grads.weights.len(), "gradient layer count");
    }
    if grads.s.len() != net.num_hidden() {
        return mismatch(net.num_hidden(), grads.s.len(), "hardness gradient count");
    }
    for (l, (gw, gb)) in net.layers().iter().zip(grads.weights.iter().zip(&grads.biases)) {
        if gw.data.len() != l.weights.data.len() {
            return mismatch(l.weights.data.len(), gw.data.len(), "weight gradient size");
        }
        if gb.len() != l.bias.len() {
            return mismatch(l.bias.len(), gb.len(), "bias gradient size");
        }
    }
    Ok(())
}

fn first_non_finite(net: &NetworkState) -> Option<String> {
    for (i, l) in net.layers().iter().enumerate() {
        if l.weights.data.iter().any(|v| !v.is_finite()) {
            return Some(format!("non-finite weight in layer {i}"));
        }
        if l.bias.iter().any(|v| !v.is_finite()) {
            return Some(format!("non-finite bias in layer {i}"));
        }
        if let Some(p) = &l.hardness {
            if !p.s().is_finite() || !p.lambda_of().is_finite() {
                return Some(format!("non-finite hardness in layer {i}"));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::network::Matrix;
    use crate::reparam::{init_profile, InitMode};
    use rand::{Rng, SeedableRng};

    fn net() -> NetworkState {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = init_profile(InitMode::Increasing, 2, 0.1, 1e-4).unwrap();
        let mut n = NetworkState::new(&[3, 4, 4, 2], ActivationKind::LambdaGelu, h, &mut rng).unwrap();
        for l in n.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        }
        n
    }

    fn filled(n: &NetworkState, v: f64) -> GradientSet {
        let mut g = GradientSet::zeros_like(n);
        g.weights.iter_mut().for_each(|m| m.data.iter_mut().for_each(|x| *x = v));
        g.biases.iter_mut().flatten().for_each(|x| *x = v);
        g.s.iter_mut().for_each(|x| *x = v);
        g
    }

    fn cfg(kind: OptimizerKind, c: f64, wd: f64) -> OptimizerConfig {
        OptimizerConfig {
            kind,
            lr_weights: 0.01,
            multiplier_c: c,
            weight_decay: wd,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::AdamW] {
            let mut n = net();
            let before = n.clone();
            let mut opt = Optimizer::new(cfg(kind, 3.0, 0.0)).unwrap();
            opt.step(&mut n, &GradientSet::zeros_like(&before)).unwrap();
            assert_eq!(n, before);
            assert_eq!(opt.state.step, 1);
        }
    }

    #[test]
    fn sgd_hardness_step_is_c_eta_g() {
        let mut n = net();
        let s0: Vec<f64> = n.hardness().map(|p| p.s()).collect();
        let mut opt = Optimizer::new(cfg(OptimizerKind::Sgd, 3.0, 0.0)).unwrap();
        let g = filled(&n, 0.5);
        opt.step(&mut n, &g).unwrap();
        for (p, s) in n.hardness().zip(s0) {
            assert_eq!(p.s(), s - 3.0 * 0.01 * 0.5);
        }
    }

    #[test]
    fn sgd_multiplier_scales_step_linearly() {
        let delta = |c: f64| {
            let mut n = net();
            let s0 = n.hardness().next().unwrap().s();
            let mut opt = Optimizer::new(cfg(OptimizerKind::Sgd, c, 0.0)).unwrap();
            let g = filled(&n, 0.25);
            opt.step(&mut n, &g).unwrap();
            let s1 = n.hardness().next().unwrap().s();
            s1 - s0
        };
        let ratio = delta(6.0) / delta(3.0);
        assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn adamw_first_step_trace() {
        let mut n = net();
        let w0 = n.layers()[0].weights.data[0];
        let b0 = n.layers()[0].bias[0];
        let mut g = GradientSet::zeros_like(&n);
        g.weights[0].data[0] = 0.3;
        g.biases[0][0] = -2.0;
        let mut opt = Optimizer::new(cfg(OptimizerKind::AdamW, 1.0, 0.0)).unwrap();
        opt.step(&mut n, &g).unwrap();
        // m̂ = g, v̂ = g²  =>  Δ = -lr·g/(|g| + eps)
        let expected_w = w0 - 0.01 * 0.3 / (0.3 + 1e-8);
        let expected_b = b0 - 0.01 * -2.0 / (2.0 + 1e-8);
        assert!((n.layers()[0].weights.data[0] - expected_w).abs() < 1e-15);
        assert!((n.layers()[0].bias[0] - expected_b).abs() < 1e-15);
        assert!(((w0 - n.layers()[0].weights.data[0]) - 0.01).abs() < 1e-9);
    }

    #[test]
    fn decay_touches_weights_only() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::AdamW] {
            let mut n = net();
            let before = n.clone();
            let mut opt = Optimizer::new(cfg(kind, 2.0, 0.1)).unwrap();
            opt.step(&mut n, &GradientSet::zeros_like(&before)).unwrap();
            for (a, b) in n.layers().iter().zip(before.layers()) {
                for (w, w0) in a.weights.data.iter().zip(&b.weights.data) {
                    assert!((w - w0 * (1.0 - 0.01 * 0.1)).abs() < 1e-15);
                }
                assert_eq!(a.bias, b.bias);
                assert_eq!(
                    a.hardness.as_ref().map(|p| p.s().to_bits()),
                    b.hardness.as_ref().map(|p| p.s().to_bits())
                );
            }
        }
    }

    #[test]
    fn frozen_hardness_never_moves() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::AdamW] {
            let mut n = net();
            n.hardness_mut().for_each(|p| p.freeze());
            let s0: Vec<u64> = n.hardness().map(|p| p.s().to_bits()).collect();
            let mut opt = Optimizer::new(cfg(kind, 9.0, 0.0)).unwrap();
            for _ in 0..5 {
                let g = filled(&n, 1.0);
                opt.step(&mut n, &g).unwrap();
            }
            let s1: Vec<u64> = n.hardness().map(|p| p.s().to_bits()).collect();
            assert_eq!(s0, s1);
        }
    }

    #[test]
    fn adamw_step_tends_to_rate_independent_of_magnitude() {
        let per_step = |kind: OptimizerKind, g: f64| {
            let mut n = net();
            let mut opt = Optimizer::new(cfg(kind, 3.0, 0.0)).unwrap();
            let mut last = 0.0;
            for _ in 0..200 {
                let s0 = n.hardness().next().unwrap().s();
                let mut grads = GradientSet::zeros_like(&n);
                grads.s[0] = g;
                opt.step(&mut n, &grads).unwrap();
                last = n.hardness().next().unwrap().s() - s0;
            }
            last
        };
        let eta_s = 0.03;
        for g in [0.01, 1.0, 50.0] {
            assert!((per_step(OptimizerKind::AdamW, g) + eta_s).abs() < 1e-6);
        }
        assert!((per_step(OptimizerKind::AdamW, -0.5) - eta_s).abs() < 1e-6);
        let small = per_step(OptimizerKind::Sgd, 0.01);
        let large = per_step(OptimizerKind::Sgd, 1.0);
        assert!((large / small - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut n = net();
        let mut opt = Optimizer::new(cfg(OptimizerKind::Sgd, 1.0, 0.0)).unwrap();
        let mut g = GradientSet::zeros_like(&n);
        g.s[1] = f64::NAN;
        assert!(matches!(opt.step(&mut n, &g), Err(Error::NonFinite(_))));
        let mut g = GradientSet::zeros_like(&n);
        g.weights[0] = Matrix::zeros(1, 1);
        assert!(matches!(opt.step(&mut n, &g), Err(Error::Dimension { .. })));
        assert!(Optimizer::new(cfg(OptimizerKind::Sgd, -1.0, 0.0)).is_err());
        assert!(Optimizer::new(OptimizerConfig {
            lr_weights: 0.0,
            ..OptimizerConfig::default()
        })
        .is_err());
    }

    #[test]
    fn overflowing_step_is_reported() {
        let mut n = net();
        let mut opt = Optimizer::new(OptimizerConfig {
            lr_weights: 1e300,
            multiplier_c: 1e300,
            ..OptimizerConfig::default()
        })
        .unwrap();
        let g = filled(&n, 1.0);
        assert!(matches!(opt.step(&mut n, &g), Err(Error::NonFinite(_))));
    }
}
