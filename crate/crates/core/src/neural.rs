//! Fully connected feedforward network with manual backpropagation, Adam and
//! a JSON checkpoint format. Shared by the autoencoder and the policy.

use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Weights are `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(flatten)]
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(spec: LayerSpec) -> Self {
        Self {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            biases: vec![0.0; spec.out_dim],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.spec.in_dim;
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(n_in)
                .zip(&self.biases)
                .map(|(row, b)| {
                    let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
                    self.spec.activation.apply(z)
                }),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    /// Seed the parameters were drawn from.
    pub seed: u64,
    /// Training epoch the parameters belong to.
    pub epoch: u64,
}

/// Activations retained by [`Network::forward`]: `values[0]` is the input,
/// `values[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
    first_layer: usize,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// `self += other`, layer-aligned from `offset`.
    pub fn accumulate(&mut self, other: &Gradients, offset: usize) {
        for (dst, src) in self.layers[offset..].iter_mut().zip(&other.layers) {
            dst.weights
                .iter_mut()
                .zip(&src.weights)
                .for_each(|(d, s)| *d += s);
            dst.biases
                .iter_mut()
                .zip(&src.biases)
                .for_each(|(d, s)| *d += s);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.biases.iter_mut())
                .for_each(|g| *g *= c);
        }
    }

    /// Adds the gradient of `(coef / 2) * ||theta||^2`.
    pub fn add_l2(&mut self, net: &Network, coef: f64) {
        for (g, l) in self.layers.iter_mut().zip(&net.layers) {
            g.weights
                .iter_mut()
                .zip(&l.weights)
                .for_each(|(g, w)| *g += coef * w);
            g.biases
                .iter_mut()
                .zip(&l.biases)
                .for_each(|(g, b)| *g += coef * b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .copied()
    }
}

impl Network {
    /// Xavier/Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], seed: u64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(specs, seed)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.spec.in_dim + layer.spec.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        Ok(Self {
            layers: specs.iter().copied().map(Layer::zeros).collect(),
            seed,
            epoch: 0,
        })
    }

    /// Layer specs from a width list, e.g. `[60, 45, 30]`, all with one activation.
    pub fn chain(dims: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
        let n = dims.len().saturating_sub(1);
        (0..n)
            .map(|l| LayerSpec {
                in_dim: dims[l],
                out_dim: dims[l + 1],
                activation: if l + 1 == n { output } else { hidden },
            })
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.spec.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_dim)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward_range(x, 0..self.layers.len())
    }

    /// Forward pass through `layers[range]` only.
    pub fn forward_range(
        &self,
        x: &[f64],
        range: Range<usize>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let first = range.start;
        let layers = &self.layers[range];
        let expected = layers.first().map_or(x.len(), |l| l.spec.in_dim);
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        let mut values = Vec::with_capacity(layers.len() + 1);
        values.push(x.to_vec());
        for layer in layers {
            let mut out = Vec::with_capacity(layer.spec.out_dim);
            layer.forward(values.last().expect("non-empty"), &mut out);
            values.push(out);
        }
        let output = values.last().cloned().unwrap_or_default();
        Ok((
            output,
            ForwardCache {
                values,
                first_layer: first,
            },
        ))
    }

    /// Inference without keeping a cache.
    pub fn predict_range(&self, x: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        let layers = &self.layers[range];
        let expected = layers.first().map_or(x.len(), |l| l.spec.in_dim);
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in layers {
            layer.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_range(x, 0..self.layers.len())
    }

    /// Gradients of `grad_output . output` w.r.t. the parameters of the layers
    /// covered by `cache`, plus the gradient w.r.t. the cached input.
    ///
    /// The returned [`Gradients`] covers only the cached layers; use
    /// [`Gradients::accumulate`] with the cache's first layer as offset to fold
    /// it into a full-network gradient.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        let n_layers = cache.values.len() - 1;
        let layers = &self.layers[cache.first_layer..cache.first_layer + n_layers];
        let out_dim = layers.last().map_or(grad_output.len(), |l| l.spec.out_dim);
        if grad_output.len() != out_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                actual: grad_output.len(),
            });
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(n_layers);
        let mut upstream = grad_output.to_vec();
        for (l, layer) in layers.iter().enumerate().rev() {
            let input = &cache.values[l];
            let output = &cache.values[l + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(output)
                .map(|(g, &y)| g * layer.spec.activation.derivative_from_output(y))
                .collect();
            let n_in = layer.spec.in_dim;
            let mut gw = vec![0.0; layer.weights.len()];
            for (row, &d) in gw.chunks_exact_mut(n_in).zip(&delta) {
                if d != 0.0 {
                    row.iter_mut().zip(input).for_each(|(g, &x)| *g = d * x);
                }
            }
            let mut down = vec![0.0; n_in];
            for (row, &d) in layer.weights.chunks_exact(n_in).zip(&delta) {
                if d != 0.0 {
                    down.iter_mut().zip(row).for_each(|(g, &w)| *g += d * w);
                }
            }
            grads.push(LayerGrad {
                weights: gw,
                biases: delta,
            });
            upstream = down;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Sum of squares of every weight and bias.
    pub fn l2_norm_sq(&self) -> f64 {
        self.parameters().map(|p| p * p).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .copied()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Mutable access to parameter `k` in [`parameters`](Self::parameters) order.
    pub fn parameter_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.biases.len() {
                return &mut l.biases[k];
            }
            k -= l.biases.len();
        }
        panic!("parameter index out of range")
    }

    /// Plain gradient descent `theta -= lr * grad`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(w, g)| *w -= lr * g);
            l.biases
                .iter_mut()
                .zip(&g.biases)
                .for_each(|(b, g)| *b -= lr * g);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(f64::is_finite)
    }

    /// Copy of `layers[range]` as a standalone network.
    pub fn slice(&self, range: Range<usize>) -> Network {
        Network {
            layers: self.layers[range].to_vec(),
            seed: self.seed,
            epoch: self.epoch,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.check()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Shape and finiteness checks applied to loaded checkpoints.
    pub fn check(&self) -> Result<()> {
        validate_specs(&self.specs())?;
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.spec.in_dim * l.spec.out_dim || l.biases.len() != l.spec.out_dim
            {
                return Err(Error::Checkpoint(format!(
                    "layer {i} parameter shape does not match its spec"
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(())
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "network needs at least one layer".into(),
        ));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "layer {i} has a zero dimension"
            )));
        }
    }
    for (i, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::InvalidConfig(format!(
                "layer {i} outputs {} but layer {} expects {}",
                w[0].out_dim,
                i + 1,
                w[1].in_dim
            )));
        }
    }
    Ok(())
}

/// Adam moments and hyperparameters for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let n = net.parameter_count();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let gs = g.weights.iter().chain(&g.biases);
            for (p, &g) in params.zip(gs) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Network {
        let mut net = Network::zeros(
            &[LayerSpec {
                in_dim: n,
                out_dim: n,
                activation: Activation::Linear,
            }],
            0,
        )
        .unwrap();
        for i in 0..n {
            net.layers[0].weights[i * n + i] = 1.0;
        }
        net
    }

    /// Central-difference gradient of `loss(net)` for every parameter.
    fn numeric_grad(net: &Network, loss: impl Fn(&Network) -> f64, h: f64) -> Vec<f64> {
        let mut probe = net.clone();
        (0..net.parameter_count())
            .map(|k| {
                let orig = *probe.parameter_mut(k);
                *probe.parameter_mut(k) = orig + h;
                let up = loss(&probe);
                *probe.parameter_mut(k) = orig - h;
                let down = loss(&probe);
                *probe.parameter_mut(k) = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn identity_forward() {
        let net = identity(4);
        let x = [0.3, -1.0, 2.0, 0.0];
        assert_eq!(net.forward(&x).unwrap().0, x.to_vec());
    }

    #[test]
    fn zero_sigmoid_layer_gives_half() {
        let net = Network::zeros(
            &[LayerSpec {
                in_dim: 3,
                out_dim: 5,
                activation: Activation::Sigmoid,
            }],
            0,
        )
        .unwrap();
        assert!(net
            .forward(&[1.0, 2.0, 3.0])
            .unwrap()
            .0
            .iter()
            .all(|&y| y == 0.5));
    }

    #[test]
    fn encoder_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Network::new(
            &Network::chain(&[60, 45, 30], Activation::Sigmoid, Activation::Sigmoid),
            0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(net.forward(&vec![0.5; 60]).unwrap().0.len(), 30);
        assert!(matches!(
            net.forward(&[0.0; 59]),
            Err(Error::DimensionMismatch {
                expected: 60,
                actual: 59
            })
        ));
    }

    #[test]
    fn rejects_broken_chain() {
        let specs = [
            LayerSpec {
                in_dim: 3,
                out_dim: 4,
                activation: Activation::Tanh,
            },
            LayerSpec {
                in_dim: 5,
                out_dim: 2,
                activation: Activation::Tanh,
            },
        ];
        assert!(Network::zeros(&specs, 0).is_err());
    }

    #[test]
    fn gradient_check_all_activations() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let acts = [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
            Activation::Linear,
        ];
        for depth in 2..=4 {
            for &act in &acts {
                let mut dims = vec![3];
                dims.extend((0..depth).map(|l| 2 + (l % 3)));
                let net = Network::new(&Network::chain(&dims, act, act), 0, &mut rng).unwrap();
                // Shift biases so ReLU units sit away from their kink.
                let mut net = net;
                for l in &mut net.layers {
                    l.biases
                        .iter_mut()
                        .for_each(|b| *b = rng.random_range(0.2..0.6));
                }
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let upstream: Vec<f64> = (0..net.output_dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let loss = |n: &Network| -> f64 {
                    n.forward(&x)
                        .unwrap()
                        .0
                        .iter()
                        .zip(&upstream)
                        .map(|(y, g)| y * g)
                        .sum()
                };
                let (_, cache) = net.forward(&x).unwrap();
                let (analytic, _) = net.backward(&cache, &upstream).unwrap();
                let numeric = numeric_grad(&net, loss, 1e-6);
                for (a, n) in analytic.iter().zip(&numeric) {
                    let scale = a.abs().max(n.abs()).max(1e-3);
                    assert!(
                        (a - n).abs() / scale < 1e-4,
                        "{act:?} depth {depth}: {a} vs {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::new(
            &Network::chain(&[4, 6, 3], Activation::Tanh, Activation::Sigmoid),
            0,
            &mut rng,
        )
        .unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let (g, _) = net.backward(&cache, &[0.0; 3]).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::new(
            &Network::chain(&[3, 2], Activation::Linear, Activation::Linear),
            0,
            &mut rng,
        )
        .unwrap();
        let x = [1.0, -2.0, 0.5];
        let up = [0.7, -0.3];
        let (_, cache) = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &up).unwrap();
        for (r, u) in up.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                assert_relative_eq!(g.layers[0].weights[r * 3 + c], u * xc);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::new(
            &Network::chain(&[3, 4, 2], Activation::Tanh, Activation::Linear),
            0,
            &mut rng,
        )
        .unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net, 1e-3);
        let zero = Gradients::zeros_like(&net);
        for _ in 0..5 {
            adam.step(&mut net, &zero);
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Network::new(
            &Network::chain(&[3, 2], Activation::Linear, Activation::Linear),
            0,
            &mut rng,
        )
        .unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net, 1e-3);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights.iter_mut().for_each(|w| *w = 0.37);
        g.layers[0].biases.iter_mut().for_each(|b| *b = -2.0);
        adam.step(&mut net, &g);
        for (a, b) in net.parameters().zip(before.parameters()) {
            assert_relative_eq!((a - b).abs(), 1e-3, max_relative = 1e-6);
        }
    }

    #[test]
    fn adam_reduces_regression_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Network::new(
            &Network::chain(&[2, 8, 1], Activation::Tanh, Activation::Linear),
            0,
            &mut rng,
        )
        .unwrap();
        let data: Vec<([f64; 2], f64)> = (0..16)
            .map(|k| {
                let x = [k as f64 / 16.0, 1.0 - k as f64 / 32.0];
                (x, 0.5 * x[0] - 0.25 * x[1] + 0.1)
            })
            .collect();
        let loss_and_grad = |net: &Network| {
            let mut g = Gradients::zeros_like(net);
            let mut loss = 0.0;
            for (x, y) in &data {
                let (out, cache) = net.forward(x).unwrap();
                let e = out[0] - y;
                loss += e * e / data.len() as f64;
                let (gl, _) = net
                    .backward(&cache, &[2.0 * e / data.len() as f64])
                    .unwrap();
                g.accumulate(&gl, 0);
            }
            (loss, g)
        };
        let mut adam = AdamState::new(&net, 1e-3);
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let (loss, g) = loss_and_grad(&net);
            assert!(loss < prev, "loss rose: {loss} >= {prev}");
            prev = loss;
            adam.step(&mut net, &g);
        }
    }

    #[test]
    fn l2_norm_examples() {
        let specs = [LayerSpec {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Linear,
        }];
        let mut net = Network::zeros(&specs, 0).unwrap();
        assert_eq!(net.l2_norm_sq(), 0.0);
        net.layers[0].weights[0] = 3.0;
        assert_eq!(net.l2_norm_sq(), 9.0);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Network::new(
            &Network::chain(&[4, 3, 2], Activation::Tanh, Activation::Tanh),
            0,
            &mut rng,
        )
        .unwrap();
        let mut scaled = net.clone();
        for k in 0..scaled.parameter_count() {
            *scaled.parameter_mut(k) *= 2.5;
        }
        assert_relative_eq!(
            scaled.l2_norm_sq(),
            6.25 * net.l2_norm_sq(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn checkpoint_is_byte_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Network::new(
            &Network::chain(&[5, 4, 3], Activation::Relu, Activation::Sigmoid),
            17,
            &mut rng,
        )
        .unwrap();
        net.epoch = 250;
        let first = net.to_json().unwrap();
        let loaded = Network::from_json(&first).unwrap();
        assert_eq!(loaded, net);
        assert_eq!(loaded.to_json().unwrap(), first);
    }

    #[test]
    fn checkpoint_rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Network::new(
            &Network::chain(&[2, 2], Activation::Relu, Activation::Relu),
            0,
            &mut rng,
        )
        .unwrap();
        net.layers[0].weights.pop();
        let text = serde_json::to_string(&net).unwrap();
        assert!(Network::from_json(&text).is_err());
    }

    #[test]
    fn forward_is_finite_for_extreme_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for act in [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
            Activation::Linear,
        ] {
            let net = Network::new(&Network::chain(&[3, 4, 2], act, act), 0, &mut rng).unwrap();
            let out = net.forward(&[1e6, -1e6, 1e3]).unwrap().0;
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }
}
