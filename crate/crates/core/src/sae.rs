//! Related and regularized stacked autoencoder (2r-SAE).
//!
//! Channel matrices are rasterized row-major, log-scaled and min-max
//! normalized, then compressed by the encoder half of a symmetric autoencoder.
//! Training minimises absolute error, a per-UE relative error (each row divided
//! by its own maximum) and an L2 penalty. New channels enter a bounded FIFO
//! memory only when the current network reconstructs them poorly.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelState;
use crate::neural::{Activation, AdamState, Gradients, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeConfig {
    /// Encoder widths after the input layer; the last entry is the code size.
    /// The input width is always `N * M`.
    pub dims: Vec<usize>,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Mini-batch updates per offline training round.
    pub t_sae: usize,
    pub memory: usize,
    /// Admission threshold on per-entry mean squared reconstruction error.
    pub threshold: f64,
    pub batch: usize,
    pub learning_rate: f64,
    /// Epochs between incremental retrain + encoder sync; 0 disables.
    pub sync_period: u64,
    /// Updates per incremental retrain.
    pub t_sae_incremental: usize,
    /// Channels sampled for the offline stage.
    pub pretrain_samples: usize,
    pub activation: Activation,
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            dims: vec![45, 30],
            gamma1: 0.5,
            gamma2: 0.08,
            t_sae: 500,
            memory: 4096,
            threshold: 0.01,
            batch: 32,
            learning_rate: 1e-3,
            sync_period: 0,
            t_sae_incremental: 50,
            pretrain_samples: 2000,
            activation: Activation::Sigmoid,
        }
    }
}

impl SaeConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let code = *self
            .dims
            .last()
            .ok_or_else(|| Error::InvalidConfig("sae.dims is empty".into()))?;
        if code > input_dim {
            return Err(Error::InvalidConfig(format!(
                "SAE code size {code} exceeds input width {input_dim}"
            )));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "sae.dims entries must be positive".into(),
            ));
        }
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
            return Err(Error::InvalidConfig(
                "sae gammas must be non-negative".into(),
            ));
        }
        if self.memory == 0 || self.batch == 0 {
            return Err(Error::InvalidConfig(
                "sae memory and batch must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn code_dim(&self) -> usize {
        self.dims.last().copied().unwrap_or(0)
    }
}

/// `1 - code / (N M)`.
pub fn compression_ratio(code_dim: usize, n_ues: usize, n_mecs: usize) -> f64 {
    1.0 - code_dim as f64 / (n_ues * n_mecs) as f64
}

/// Running log10 bounds used to map gains into `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub log_lo: f64,
    pub log_hi: f64,
}

/// Fraction of the observed span added below the minimum so that normalized
/// entries stay strictly positive.
const LOWER_MARGIN: f64 = 0.05;
const FLOOR: f64 = 1e-6;

impl Normalizer {
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a ChannelState>) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in samples {
            for &g in c.as_slice() {
                let v = g.log10();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(
                "cannot fit normalizer without samples".into(),
            ));
        }
        let span = (hi - lo).max(1e-3);
        Ok(Self {
            log_lo: lo - LOWER_MARGIN * span,
            log_hi: hi,
        })
    }

    /// Widen the bounds to cover `channel`.
    pub fn observe(&mut self, channel: &ChannelState) {
        for &g in channel.as_slice() {
            let v = g.log10();
            if v > self.log_hi {
                self.log_hi = v;
            }
            if v <= self.log_lo {
                self.log_lo = v - LOWER_MARGIN * (self.log_hi - v).max(1e-3);
            }
        }
    }

    pub fn normalize(&self, gain: f64) -> f64 {
        ((gain.log10() - self.log_lo) / (self.log_hi - self.log_lo)).clamp(FLOOR, 1.0)
    }
}

/// Row-major flattening (`(i, j)` at `i * M + j`) followed by normalization.
pub fn rasterize(channel: &ChannelState, normalizer: &Normalizer) -> Vec<f64> {
    channel
        .as_slice()
        .iter()
        .map(|&g| normalizer.normalize(g))
        .collect()
}

/// Per-entry mean squared error.
pub fn mse(x: &[f64], x_hat: &[f64]) -> f64 {
    x.iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / x.len() as f64
}

fn row_max(row: &[f64]) -> (usize, f64) {
    row.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
    )
}

/// Per-sample error terms (absolute + weighted relative) and their gradient
/// with respect to the reconstruction.
fn sample_terms(x: &[f64], x_hat: &[f64], n_mecs: usize, gamma1: f64) -> Result<(f64, Vec<f64>)> {
    let len = x.len();
    let mut grad: Vec<f64> = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| 2.0 * (b - a) / len as f64)
        .collect();
    let mut loss = mse(x, x_hat);
    if gamma1 > 0.0 {
        for (row, (xr, hr)) in x
            .chunks_exact(n_mecs)
            .zip(x_hat.chunks_exact(n_mecs))
            .enumerate()
        {
            let (_, mx) = row_max(xr);
            let (k_hat, mh) = row_max(hr);
            if !(mx > 0.0 && mh > 0.0) {
                return Err(Error::Infeasible(format!(
                    "row {row} has a non-positive maximum"
                )));
            }
            let base = row * n_mecs;
            let mut corner = 0.0;
            for j in 0..n_mecs {
                let diff = hr[j] / mh - xr[j] / mx;
                loss += 0.5 * gamma1 * diff * diff;
                grad[base + j] += gamma1 * diff / mh;
                corner -= gamma1 * diff * hr[j] / (mh * mh);
            }
            grad[base + k_hat] += corner;
        }
    }
    Ok((loss, grad))
}

/// 2r-SAE loss over a batch of normalized channel vectors.
pub fn loss_2r(
    net: &Network,
    batch: &[Vec<f64>],
    n_mecs: usize,
    gamma1: f64,
    gamma2: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let mut total = 0.0;
    for x in batch {
        let x_hat = net.predict(x)?;
        total += sample_terms(x, &x_hat, n_mecs, gamma1)?.0;
    }
    Ok(total / batch.len() as f64 + 0.5 * gamma2 * net.l2_norm_sq())
}

/// [`loss_2r`] together with its parameter gradient.
pub fn loss_2r_with_grad(
    net: &Network,
    batch: &[Vec<f64>],
    n_mecs: usize,
    gamma1: f64,
    gamma2: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let mut grads = Gradients::zeros_like(net);
    let mut total = 0.0;
    for x in batch {
        let (x_hat, cache) = net.forward(x)?;
        let (loss, upstream) = sample_terms(x, &x_hat, n_mecs, gamma1)?;
        total += loss;
        let (g, _) = net.backward(&cache, &upstream)?;
        grads.accumulate(&g, 0);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    grads.add_l2(net, gamma2);
    Ok((total * inv + 0.5 * gamma2 * net.l2_norm_sq(), grads))
}

/// Bounded FIFO store of normalized channel vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaeMemory {
    items: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl SaeMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, x: Vec<f64>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(x);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Vec<f64>> {
        self.items.get(i)
    }
}

/// Per-entry MSE between `x` and its reconstruction.
pub fn reconstruction_error(net: &Network, x: &[f64]) -> Result<f64> {
    Ok(mse(x, &net.predict(x)?))
}

/// Admits `x` iff its reconstruction error exceeds `threshold`.
pub fn memory_update(
    memory: &mut SaeMemory,
    x: Vec<f64>,
    net: &Network,
    threshold: f64,
) -> Result<bool> {
    let admit = reconstruction_error(net, &x)? > threshold;
    if admit {
        memory.push(x);
    }
    Ok(admit)
}

/// `iterations` mini-batch Adam updates on the 2r-SAE loss; returns the
/// per-iteration batch loss.
pub fn train<R: Rng + ?Sized>(
    net: &mut Network,
    adam: &mut AdamState,
    memory: &SaeMemory,
    config: &SaeConfig,
    n_mecs: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let batch_size = config.batch.min(memory.len()).max(1);
    let mut trace = Vec::with_capacity(iterations);
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..iterations {
        batch.clear();
        for _ in 0..batch_size {
            let k = rng.random_range(0..memory.len());
            batch.push(memory.get(k).expect("index in range").clone());
        }
        let (loss, grads) = loss_2r_with_grad(net, &batch, n_mecs, config.gamma1, config.gamma2)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(trace.len()));
        }
        adam.step(net, &grads);
        trace.push(loss);
    }
    Ok(trace)
}

/// Compressed DRL state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedState {
    pub values: Vec<f64>,
    pub epoch: u64,
}

/// `1 - mean(|x - x_hat| / max(|x|, 1e-9))`, clamped to `[0, 1]`.
pub fn reconstruction_accuracy(
    reconstruct: impl Fn(&[f64]) -> Result<Vec<f64>>,
    test: &[Vec<f64>],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for x in test {
        let x_hat = reconstruct(x)?;
        for (a, b) in x.iter().zip(&x_hat) {
            sum += (a - b).abs() / a.abs().max(1e-9);
            count += 1;
        }
    }
    Ok((1.0 - sum / count as f64).clamp(0.0, 1.0))
}

/// Autoencoder plus its normalizer, memory and online encoder snapshot.
#[derive(Debug, Clone)]
pub struct Sae {
    pub config: SaeConfig,
    pub n_ues: usize,
    pub n_mecs: usize,
    /// `None` when the code is as wide as the input: the state is the
    /// normalized channel itself.
    net: Option<Network>,
    adam: Option<AdamState>,
    encoder: Option<Network>,
    pub normalizer: Normalizer,
    pub memory: SaeMemory,
    /// Increments at every encoder sync.
    pub version: u64,
}

impl Sae {
    pub fn new<R: Rng + ?Sized>(
        config: SaeConfig,
        n_ues: usize,
        n_mecs: usize,
        normalizer: Normalizer,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let input = n_ues * n_mecs;
        config.validate(input)?;
        let (net, adam, encoder) = if config.code_dim() == input {
            (None, None, None)
        } else {
            let mut widths = vec![input];
            widths.extend(&config.dims);
            let mut mirrored: Vec<usize> = widths.clone();
            mirrored.extend(widths.iter().rev().skip(1));
            let specs = Network::chain(&mirrored, config.activation, Activation::Sigmoid);
            let net = Network::new(&specs, seed, rng)?;
            let adam = AdamState::new(&net, config.learning_rate);
            let encoder = net.slice(0..config.dims.len());
            (Some(net), Some(adam), Some(encoder))
        };
        let memory = SaeMemory::new(config.memory);
        Ok(Self {
            config,
            n_ues,
            n_mecs,
            net,
            adam,
            encoder,
            normalizer,
            memory,
            version: 0,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.net.is_none()
    }

    pub fn network(&self) -> Option<&Network> {
        self.net.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.n_ues * self.n_mecs
    }

    pub fn code_dim(&self) -> usize {
        self.config.code_dim()
    }

    pub fn compression_ratio(&self) -> f64 {
        compression_ratio(self.code_dim(), self.n_ues, self.n_mecs)
    }

    pub fn rasterize(&self, channel: &ChannelState) -> Vec<f64> {
        rasterize(channel, &self.normalizer)
    }

    /// Error check + FIFO admission of one channel; returns whether it was admitted.
    pub fn observe(&mut self, channel: &ChannelState) -> Result<bool> {
        self.normalizer.observe(channel);
        let x = self.rasterize(channel);
        match &self.net {
            Some(net) => memory_update(&mut self.memory, x, net, self.config.threshold),
            None => Ok(false),
        }
    }

    /// Runs `iterations` updates on the memory (the online encoder is not touched).
    pub fn train<R: Rng + ?Sized>(&mut self, iterations: usize, rng: &mut R) -> Result<Vec<f64>> {
        let (Some(net), Some(adam)) = (self.net.as_mut(), self.adam.as_mut()) else {
            return Ok(Vec::new());
        };
        train(
            net,
            adam,
            &self.memory,
            &self.config,
            self.n_mecs,
            iterations,
            rng,
        )
    }

    /// Copies the trained encoder layers into the online snapshot.
    pub fn sync(&mut self) {
        if let Some(net) = &self.net {
            self.encoder = Some(net.slice(0..self.config.dims.len()));
        }
        self.version += 1;
    }

    /// Online compression through the encoder snapshot.
    pub fn encode(&self, channel: &ChannelState) -> Result<EncodedState> {
        let x = self.rasterize(channel);
        self.encode_vector(&x, channel.epoch)
    }

    pub fn encode_vector(&self, x: &[f64], epoch: u64) -> Result<EncodedState> {
        let values = match &self.encoder {
            Some(enc) => enc.predict(x)?,
            None => {
                if x.len() != self.input_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.input_dim(),
                        actual: x.len(),
                    });
                }
                x.to_vec()
            }
        };
        Ok(EncodedState { values, epoch })
    }

    /// Full encode/decode pass of the training network.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.net {
            Some(net) => net.predict(x),
            None => Ok(x.to_vec()),
        }
    }

    pub fn accuracy(&self, test: &[ChannelState]) -> Result<f64> {
        let xs: Vec<Vec<f64>> = test.iter().map(|c| self.rasterize(c)).collect();
        reconstruction_accuracy(|x| self.reconstruct(x), &xs)
    }

    pub fn to_checkpoint(&self) -> SaeCheckpoint {
        SaeCheckpoint {
            config: self.config.clone(),
            n_ues: self.n_ues,
            n_mecs: self.n_mecs,
            normalizer: self.normalizer.clone(),
            network: self.net.clone(),
            version: self.version,
        }
    }

    /// Restores a trained autoencoder; the online encoder is synced to it.
    pub fn from_checkpoint(ckpt: SaeCheckpoint) -> Result<Self> {
        let input = ckpt.n_ues * ckpt.n_mecs;
        ckpt.config.validate(input)?;
        if let Some(net) = &ckpt.network {
            net.check()?;
            if net.input_dim() != input || net.output_dim() != input {
                return Err(Error::Checkpoint(
                    "SAE network width does not match N * M".into(),
                ));
            }
        }
        let adam = ckpt
            .network
            .as_ref()
            .map(|n| AdamState::new(n, ckpt.config.learning_rate));
        let encoder = ckpt
            .network
            .as_ref()
            .map(|n| n.slice(0..ckpt.config.dims.len()));
        Ok(Self {
            memory: SaeMemory::new(ckpt.config.memory),
            config: ckpt.config,
            n_ues: ckpt.n_ues,
            n_mecs: ckpt.n_mecs,
            net: ckpt.network,
            adam,
            encoder,
            normalizer: ckpt.normalizer,
            version: ckpt.version,
        })
    }
}

/// On-disk SAE: network checkpoint plus normalization bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeCheckpoint {
    pub config: SaeConfig,
    pub n_ues: usize,
    pub n_mecs: usize,
    pub normalizer: Normalizer,
    pub network: Option<Network>,
    pub version: u64,
}

impl SaeCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
