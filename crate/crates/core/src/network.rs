//! Dense feed-forward classifier with one shared hardness per hidden layer and
//! exact reverse-mode gradients for weights, biases and hardness variables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{activate, activation_dx, lambda_gelu_dlambda_unchecked, ActivationKind};
use crate::error::{Error, Result};
use crate::reparam::HardnessParam;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
                context: "matrix buffer",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// One affine layer. Hidden layers carry a hardness parameter; the output
/// layer does not and emits raw logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    /// `[out × in]`, row-major.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub hardness: Option<HardnessParam>,
}

impl LayerState {
    pub fn in_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkState {
    layers: Vec<LayerState>,
    pub activation: ActivationKind,
    /// Bumped whenever parameters may have changed; forward caches record it
    /// so a backward pass against edited parameters is refused.
    #[serde(skip)]
    revision: u64,
}

impl PartialEq for NetworkState {
    fn eq(&self, other: &Self) -> bool {
        self.activation == other.activation && self.layers == other.layers
    }
}

/// Intermediate values kept between `forward` and `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    /// Input fed to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activations of each hidden layer.
    preacts: Vec<Matrix>,
    /// Effective hardness used by each hidden layer.
    lambdas: Vec<f64>,
}

/// Gradients of a scalar loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    /// `∂L/∂s` per hidden layer; zero when the hardness is frozen or the
    /// activation does not use it.
    pub s: Vec<f64>,
    /// `∂L/∂λ` per hidden layer, before the `dλ/ds` factor.
    pub lambda: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &NetworkState) -> Self {
        let hidden = net.num_hidden();
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            s: vec![0.0; hidden],
            lambda: vec![0.0; hidden],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|m| m.data.iter().all(|v| v.is_finite()))
            && self.biases.iter().flatten().all(|v| v.is_finite())
            && self.s.iter().all(|v| v.is_finite())
    }
}

impl NetworkState {
    /// Builds a network with fan-scaled uniform weights in `[-a, a]`,
    /// `a = √(6/(fan_in + fan_out))`, and zero biases. `hardness` supplies one
    /// parameter per hidden layer.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: ActivationKind,
        hardness: Vec<HardnessParam>,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Domain("a network needs at least input and output sizes".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Domain("layer sizes must be positive".into()));
        }
        let hidden = layer_sizes.len() - 2;
        if hardness.len() != hidden {
            return Err(Error::Dimension {
                expected: hidden,
                actual: hardness.len(),
                context: "hardness parameters per hidden layer",
            });
        }
        let mut hardness = hardness.into_iter();
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for (i, pair) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect();
            layers.push(LayerState {
                weights: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
                hardness: if i < hidden { hardness.next() } else { None },
            });
        }
        Ok(Self {
            layers,
            activation,
            revision: 0,
        })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<LayerState>, activation: ActivationKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Dimension {
                    expected: l.out_dim(),
                    actual: l.bias.len(),
                    context: "bias length",
                });
            }
            let last = i + 1 == layers.len();
            if last == l.hardness.is_some() {
                return Err(Error::Domain(
                    "every hidden layer needs a hardness parameter and the output layer none".into(),
                ));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.in_dim() != l.out_dim() {
                    return Err(Error::Dimension {
                        expected: l.out_dim(),
                        actual: next.in_dim(),
                        context: "consecutive layer widths",
                    });
                }
            }
        }
        Ok(Self {
            layers,
            activation,
            revision: 0,
        })
    }

    pub fn layers(&self) -> &[LayerState] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(LayerState::out_dim));
        sizes
    }

    pub fn hardness(&self) -> impl Iterator<Item = &HardnessParam> {
        self.layers.iter().filter_map(|l| l.hardness.as_ref())
    }

    /// Mutable access to every hidden layer's hardness.
    pub fn hardness_mut(&mut self) -> impl Iterator<Item = &mut HardnessParam> {
        self.revision += 1;
        self.layers.iter_mut().filter_map(|l| l.hardness.as_mut())
    }

    /// Mutable access to the layers; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [LayerState] {
        self.revision += 1;
        &mut self.layers
    }

    /// Effective hardness of each hidden layer.
    pub fn lambda_profile(&self) -> Vec<f64> {
        self.hardness().map(HardnessParam::effective_lambda).collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let batch = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let (logits, cache) = self.forward_batch(&batch)?;
        Ok((logits.data, cache))
    }

    /// Forward pass over a batch laid out one sample per row.
    pub fn forward_batch(&self, input: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if input.cols != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: input.cols,
                context: "network input width",
            });
        }
        let hidden = self.num_hidden();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(hidden);
        let mut lambdas = Vec::with_capacity(hidden);
        let mut current = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &current);
            inputs.push(current);
            if i < hidden {
                let lambda = layer
                    .hardness
                    .as_ref()
                    .map(HardnessParam::effective_lambda)
                    .unwrap_or(1.0);
                let mut a = Matrix::zeros(z.rows, z.cols);
                activate(self.activation, lambda, &z.data, &mut a.data);
                preacts.push(z);
                lambdas.push(lambda);
                current = a;
            } else {
                current = z;
            }
        }
        Ok((
            current,
            ForwardCache {
                revision: self.revision,
                inputs,
                preacts,
                lambdas,
            },
        ))
    }

    /// Logits only, for evaluation.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_batch(input)?.0)
    }

    /// Reverse pass. `loss_grad` is `∂L/∂logits` for the batch that produced
    /// `cache`; per-sample contributions are summed, so any batch averaging
    /// belongs in `loss_grad`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Matrix) -> Result<GradientSet> {
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let batch = cache.inputs[0].rows;
        if loss_grad.rows != batch || loss_grad.cols != self.output_dim() {
            return Err(Error::Dimension {
                expected: batch * self.output_dim(),
                actual: loss_grad.rows * loss_grad.cols,
                context: "loss gradient shape",
            });
        }
        let hidden = self.num_hidden();
        let mut grads = GradientSet::zeros_like(self);
        // ∂L/∂(pre-activation) of the layer being processed
        let mut delta = loss_grad.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.inputs[i];
            let gw = &mut grads.weights[i];
            let gb = &mut grads.biases[i];
            for n in 0..batch {
                let d = delta.row(n);
                let x = input.row(n);
                for (o, &dv) in d.iter().enumerate() {
                    gb[o] += dv;
                    if dv != 0.0 {
                        for (g, &xv) in gw.row_mut(o).iter_mut().zip(x) {
                            *g += dv * xv;
                        }
                    }
                }
            }
            if i == 0 {
                break;
            }
            // ∂L/∂a for the previous hidden layer's output
            let mut upstream = Matrix::zeros(batch, layer.in_dim());
            for n in 0..batch {
                let d = delta.row(n);
                let u = upstream.row_mut(n);
                for (o, &dv) in d.iter().enumerate() {
                    if dv != 0.0 {
                        for (uv, &w) in u.iter_mut().zip(layer.weights.row(o)) {
                            *uv += dv * w;
                        }
                    }
                }
            }
            let h = i - 1;
            debug_assert!(h < hidden);
            let z = &cache.preacts[h];
            let lambda = cache.lambdas[h];
            let mut g_lambda = 0.0;
            for (uv, &zv) in upstream.data.iter_mut().zip(&z.data) {
                if self.activation == ActivationKind::LambdaGelu {
                    g_lambda += *uv * lambda_gelu_dlambda_unchecked(zv, lambda);
                }
                *uv *= activation_dx(self.activation, lambda, zv);
            }
            grads.lambda[h] = g_lambda;
            if let Some(p) = self.layers[h].hardness.as_ref() {
                if self.activation == ActivationKind::LambdaGelu && !p.is_frozen() {
                    grads.s[h] = g_lambda * p.dlambda_ds();
                }
            }
            delta = upstream;
        }
        Ok(grads)
    }

    /// Serializes every parameter, the temperature and the activation kind.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        crate::checkpoint::encode(self)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        crate::checkpoint::decode(bytes)
    }
}

fn affine(layer: &LayerState, input: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(input.rows, layer.out_dim());
    for n in 0..input.rows {
        let x = input.row(n);
        let o = out.row_mut(n);
        for (j, ov) in o.iter_mut().enumerate() {
            let w = layer.weights.row(j);
            let mut acc = layer.bias[j];
            for (wv, xv) in w.iter().zip(x) {
                acc += wv * xv;
            }
            *ov = acc;
        }
    }
    out
}

/// Cross-entropy of one sample, via log-sum-exp. Returns the loss and
/// `softmax(logits) - onehot(label)`.
pub fn loss_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Dimension {
            expected: logits.len(),
            actual: label,
            context: "class label out of range",
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - lse).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean cross-entropy over a batch and the matching `∂L/∂logits`.
pub fn batch_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows {
        return Err(Error::Dimension {
            expected: logits.rows,
            actual: labels.len(),
            context: "labels per batch",
        });
    }
    let scale = 1.0 / logits.rows as f64;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    let mut total = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let (l, g) = loss_cross_entropy(logits.row(n), label)?;
        total += l;
        for (dst, gv) in grad.row_mut(n).iter_mut().zip(g) {
            *dst = gv * scale;
        }
    }
    Ok((total * scale, grad))
}

/// Fraction of rows whose arg-max logit matches the label. Ties resolve to
/// the lowest class index.
pub fn accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(n, &label)| {
            let row = logits.row(n);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best == label
        })
        .count();
    correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reparam::{init_profile, InitMode};
    use crate::testutil::close;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(sizes: &[usize], seed: u64, lambdas: &[f64], kind: ActivationKind) -> NetworkState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = lambdas
            .iter()
            .map(|&l| HardnessParam::from_lambda(l, 0.3).unwrap())
            .collect();
        let mut n = NetworkState::new(sizes, kind, h, &mut rng).unwrap();
        for l in n.layers_mut() {
            for b in l.bias.iter_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        n
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let mut n = net(&[3, 4, 2], 1, &[1.5], ActivationKind::LambdaGelu);
        for l in n.layers_mut() {
            l.weights.data.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let (logits, _) = n.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(logits, vec![0.0, 0.0]);
    }

    #[test]
    fn output_layer_has_no_activation() {
        let layer = LayerState {
            weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: vec![0.0],
            hardness: None,
        };
        let n = NetworkState::from_layers(vec![layer], ActivationKind::Gelu).unwrap();
        let (logits, _) = n.forward(&[2.0]).unwrap();
        assert_eq!(logits, vec![2.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let n = net(&[3, 4, 2], 1, &[1.5], ActivationKind::LambdaGelu);
        assert!(matches!(n.forward(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn forward_matches_straight_line_arithmetic() {
        let n = net(&[3, 5, 2], 9, &[1.7], ActivationKind::LambdaGelu);
        let x = [0.3, -1.2, 2.0];
        let (logits, _) = n.forward(&x).unwrap();
        let l0 = &n.layers[0];
        let l1 = &n.layers[1];
        let lam = l0.hardness.as_ref().unwrap().lambda_of();
        let mut hidden = [0.0; 5];
        for j in 0..5 {
            let mut z = l0.bias[j];
            for k in 0..3 {
                z += l0.weights.data[j * 3 + k] * x[k];
            }
            // Φ via erfc, written independently of gate::normal_cdf
            let cdf = 0.5 * libm::erfc(-lam * z / std::f64::consts::SQRT_2);
            hidden[j] = z * cdf;
        }
        for o in 0..2 {
            let mut z = l1.bias[o];
            for j in 0..5 {
                z += l1.weights.data[o * 5 + j] * hidden[j];
            }
            assert!((z - logits[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, grad) = loss_cross_entropy(&[0.7; 5], 2).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        let logits = [1.0, -0.5, 2.5, 0.1];
        let (_, grad) = loss_cross_entropy(&logits, 1).unwrap();
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        for k in 0..4 {
            let h = 1e-5;
            let mut up = logits;
            up[k] += h;
            let mut down = logits;
            down[k] -= h;
            let fd = (loss_cross_entropy(&up, 1).unwrap().0 - loss_cross_entropy(&down, 1).unwrap().0)
                / (2.0 * h);
            assert!(close(grad[k], fd, 1e-6, 1e-10));
        }
        assert!(loss_cross_entropy(&logits, 4).is_err());
        let (big, _) = loss_cross_entropy(&[1000.0, -1000.0], 0).unwrap();
        assert!(big.is_finite() && big.abs() < 1e-12);
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let n = net(&[3, 4, 4, 2], 5, &[1.2, 3.0], ActivationKind::LambdaGelu);
        let x = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -1.0, 0.5, 2.0]).unwrap();
        let (_, cache) = n.forward_batch(&x).unwrap();
        let g = n.backward(&cache, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(g, GradientSet::zeros_like(&n));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut n = net(&[3, 4, 2], 5, &[1.2], ActivationKind::LambdaGelu);
        let (_, cache) = n.forward(&[0.1, 0.2, 0.3]).unwrap();
        n.layers_mut()[0].bias[0] += 1.0;
        let g = Matrix::zeros(1, 2);
        assert_eq!(n.backward(&cache, &g), Err(Error::StaleCache));
    }

    /// Every gradient coordinate against a central difference of the mean loss.
    fn check_gradients(n: &NetworkState, x: &Matrix, labels: &[usize]) {
        let loss_of = |n: &NetworkState| {
            let logits = n.predict(x).unwrap();
            batch_cross_entropy(&logits, labels).unwrap().0
        };
        let (logits, cache) = n.forward_batch(x).unwrap();
        let (_, dlogits) = batch_cross_entropy(&logits, labels).unwrap();
        let g = n.backward(&cache, &dlogits).unwrap();
        let h = 1e-5;
        for li in 0..n.layers.len() {
            for k in 0..n.layers[li].weights.data.len() {
                let mut p = n.clone();
                p.layers_mut()[li].weights.data[k] += h;
                let mut m = n.clone();
                m.layers_mut()[li].weights.data[k] -= h;
                let fd = (loss_of(&p) - loss_of(&m)) / (2.0 * h);
                let an = g.weights[li].data[k];
                assert!(close(an, fd, 1e-5, 1e-8), "w[{li}][{k}] {an} vs {fd}");
            }
            for k in 0..n.layers[li].bias.len() {
                let mut p = n.clone();
                p.layers_mut()[li].bias[k] += h;
                let mut m = n.clone();
                m.layers_mut()[li].bias[k] -= h;
                let fd = (loss_of(&p) - loss_of(&m)) / (2.0 * h);
                assert!(close(g.biases[li][k], fd, 1e-5, 1e-8), "b[{li}][{k}]");
            }
        }
        for hi in 0..n.num_hidden() {
            let s0 = n.layers[hi].hardness.as_ref().unwrap().s();
            let mut p = n.clone();
            p.layers_mut()[hi].hardness.as_mut().unwrap().set_s_raw(s0 + h);
            let mut m = n.clone();
            m.layers_mut()[hi].hardness.as_mut().unwrap().set_s_raw(s0 - h);
            let fd = (loss_of(&p) - loss_of(&m)) / (2.0 * h);
            assert!(close(g.s[hi], fd, 1e-5, 1e-8), "s[{hi}] {} vs {fd}", g.s[hi]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let n = net(&[4, 5, 5, 3], 21, &[1.3, 4.0], ActivationKind::LambdaGelu);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-2.0..2.0)).collect())
            .unwrap();
        check_gradients(&n, &x, &[0, 2, 1]);
    }

    #[test]
    fn gelu_and_relu_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Matrix::from_vec(2, 4, (0..8).map(|_| rng.random_range(-2.0..2.0)).collect())
            .unwrap();
        let n = net(&[4, 6, 3], 2, &[2.0], ActivationKind::Gelu);
        check_gradients(&n, &x, &[1, 0]);
        // ReLU is piecewise linear; with random inputs no pre-activation sits
        // within h of the kink
        let n = net(&[4, 6, 3], 2, &[2.0], ActivationKind::Relu);
        check_gradients(&n, &x, &[1, 0]);
    }

    #[test]
    fn frozen_hardness_has_zero_s_gradient() {
        let n = net(&[3, 4, 4, 2], 13, &[1.5, 2.5], ActivationKind::LambdaGelu);
        let mut frozen = n.clone();
        frozen.hardness_mut().for_each(|p| p.freeze());
        let x = Matrix::from_vec(1, 3, vec![0.4, -0.7, 1.1]).unwrap();
        let run = |n: &NetworkState| {
            let (logits, cache) = n.forward_batch(&x).unwrap();
            let (_, d) = batch_cross_entropy(&logits, &[1]).unwrap();
            n.backward(&cache, &d).unwrap()
        };
        let a = run(&n);
        let b = run(&frozen);
        assert!(a.s.iter().all(|&g| g != 0.0));
        assert!(b.s.iter().all(|&g| g == 0.0));
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }

    #[test]
    fn s_gradient_factorizes() {
        let n = net(&[3, 6, 6, 2], 17, &[1.1, 6.0], ActivationKind::LambdaGelu);
        let x = Matrix::from_vec(2, 3, vec![0.5, -0.2, 1.0, -1.5, 0.3, 0.8]).unwrap();
        let (logits, cache) = n.forward_batch(&x).unwrap();
        let (_, d) = batch_cross_entropy(&logits, &[0, 1]).unwrap();
        let g = n.backward(&cache, &d).unwrap();
        for (h, p) in n.hardness().enumerate() {
            let expected = g.lambda[h] * p.dlambda_ds();
            assert_eq!(g.s[h], expected);
            // ∂L/∂λ by finite differences through a pinned hardness
            let step = 1e-5;
            let pinned = |lam: f64| {
                let mut m = n.clone();
                let q = m.layers_mut()[h].hardness.as_mut().unwrap();
                q.freeze();
                q.set_scheduled(lam).unwrap();
                batch_cross_entropy(&m.predict(&x).unwrap(), &[0, 1]).unwrap().0
            };
            let lam = p.lambda_of();
            let fd = (pinned(lam + step) - pinned(lam - step)) / (2.0 * step);
            assert!(close(g.lambda[h], fd, 1e-5, 1e-10));
        }
    }

    #[test]
    fn deterministic_construction_and_passes() {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let h = init_profile(InitMode::Increasing, 2, 0.1, 1e-4).unwrap();
            NetworkState::new(&[2, 8, 8, 2], ActivationKind::LambdaGelu, h, &mut rng).unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        let x = Matrix::from_vec(1, 2, vec![0.3, 0.9]).unwrap();
        let (la, ca) = a.forward_batch(&x).unwrap();
        let (lb, cb) = b.forward_batch(&x).unwrap();
        assert_eq!(la, lb);
        let (_, d) = batch_cross_entropy(&la, &[1]).unwrap();
        assert_eq!(a.backward(&ca, &d).unwrap(), b.backward(&cb, &d).unwrap());
    }

    #[test]
    fn weight_init_respects_fan_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = init_profile(InitMode::Uniform, 1, 0.1, 1e-4).unwrap();
        let n = NetworkState::new(&[10, 30, 5], ActivationKind::LambdaGelu, h, &mut rng).unwrap();
        let a0 = (6.0f64 / 40.0).sqrt();
        assert!(n.layers[0].weights.data.iter().all(|w| w.abs() <= a0));
        assert!(n.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5]).unwrap();
        assert_eq!(accuracy(&logits, &[0, 1, 0]), 1.0);
        assert_eq!(accuracy(&logits, &[1, 1, 1]), 1.0 / 3.0);
    }
}
