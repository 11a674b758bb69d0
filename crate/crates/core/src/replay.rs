//! Experience replay with a preserve strategy and a priority strategy.
//!
//! Each transition is stamped with the policy's squared parameter norm when it
//! was collected. When the buffer is full, the oldest transition whose stamp is
//! still close to the current norm (`1/rho_max < rho < rho_max`) is kept and the
//! oldest *non*-reusable one is evicted instead. Sampling is proportional to
//! `(|loss decrease| + eps)^tau`.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OffloadDecision;
use crate::sae::EncodedState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub rho_max: f64,
    pub tau: f64,
    pub eps: f64,
    /// Keep reusable transitions on eviction.
    pub preserve: bool,
    /// Sample by priority; uniform otherwise.
    pub prioritized: bool,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 1024,
            rho_max: 1.2,
            tau: 0.6,
            eps: 0.001,
            preserve: true,
            prioritized: true,
        }
    }
}

impl ReplayConfig {
    /// Plain FIFO buffer with uniform sampling.
    pub fn traditional(capacity: usize) -> Self {
        Self {
            capacity,
            preserve: false,
            prioritized: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidConfig(
                "replay.capacity must be positive".into(),
            ));
        }
        if !(self.rho_max > 1.0) {
            return Err(Error::InvalidConfig("replay.rho_max must exceed 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("replay.eps must be positive".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(
                "replay.tau must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: EncodedState,
    /// Rasterized channel the state was encoded from, for re-encoding after
    /// an encoder sync.
    pub channel: Vec<f64>,
    /// Encoder version that produced `state`.
    pub encoder_version: u64,
    pub best_action: OffloadDecision,
    /// Policy `||theta||^2` at collection time.
    pub theta_norm_sq: f64,
    /// `|loss decrease| + eps`.
    pub priority: f64,
    pub collect_epoch: u64,
}

/// `||theta_now||^2 / ||theta_then||^2`.
pub fn dissimilarity(theta_norm_now: f64, theta_norm_then: f64) -> Result<f64> {
    if !(theta_norm_then > 0.0) {
        return Err(Error::Infeasible(
            "collection-time parameter norm must be positive".into(),
        ));
    }
    Ok(theta_norm_now / theta_norm_then)
}

/// Strict `1/rho_max < rho < rho_max`.
pub fn is_reusable(rho: f64, rho_max: f64) -> bool {
    rho > 1.0 / rho_max && rho < rho_max
}

/// Counters reported alongside the epoch log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub insertions: u64,
    pub evictions: u64,
    /// Evictions where the oldest transition was reusable and kept.
    pub preserve_hits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    config: ReplayConfig,
    items: VecDeque<Transition>,
    theta_norm_now: f64,
    stats: ReplayStats,
}

impl ReplayBuffer {
    pub fn new(config: ReplayConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            items: VecDeque::with_capacity(config.capacity),
            config,
            theta_norm_now: 0.0,
            stats: ReplayStats::default(),
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn stats(&self) -> ReplayStats {
        self.stats
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn get_mut(&mut self, i: usize) -> Option<&mut Transition> {
        self.items.get_mut(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn mean_priority(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(|t| t.priority).sum::<f64>() / self.items.len() as f64
    }

    fn reusable(&self, t: &Transition, theta_norm_now: f64) -> bool {
        dissimilarity(theta_norm_now, t.theta_norm_sq)
            .is_ok_and(|rho| is_reusable(rho, self.config.rho_max))
    }

    /// Inserts `transition` at the current maximum priority (1.0 when empty),
    /// evicting first if the buffer is full.
    pub fn append(&mut self, mut transition: Transition, theta_norm_now: f64) {
        self.theta_norm_now = theta_norm_now;
        if self.items.len() >= self.config.capacity {
            let victim = if self.config.preserve {
                self.items
                    .iter()
                    .position(|t| !self.reusable(t, theta_norm_now))
                    .unwrap_or(0)
            } else {
                0
            };
            if victim > 0 {
                self.stats.preserve_hits += 1;
            }
            self.items.remove(victim);
            self.stats.evictions += 1;
        }
        transition.priority = self
            .items
            .iter()
            .map(|t| t.priority)
            .fold(f64::NEG_INFINITY, f64::max);
        if !transition.priority.is_finite() {
            transition.priority = 1.0;
        }
        self.items.push_back(transition);
        self.stats.insertions += 1;
    }

    /// Sampling probabilities `p_i^tau / sum_k p_k^tau` (uniform when not prioritized).
    pub fn probabilities(&self) -> Vec<f64> {
        let weights = self.weights();
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    fn weights(&self) -> Vec<f64> {
        if self.config.prioritized {
            self.items
                .iter()
                .map(|t| t.priority.powf(self.config.tau))
                .collect()
        } else {
            vec![1.0; self.items.len()]
        }
    }

    /// Indices of `batch_size` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let dist = WeightedIndex::new(self.weights())
            .map_err(|e| Error::Infeasible(format!("sampling weights: {e}")))?;
        Ok((0..batch_size).map(|_| dist.sample(rng)).collect())
    }

    /// Restamps the sampled transitions with `|delta_loss| + eps` and records
    /// the current norm for later reusability checks.
    pub fn update_stats(
        &mut self,
        indices: &[usize],
        delta_loss: f64,
        theta_norm_now: f64,
    ) -> Result<()> {
        let stamp = delta_loss.abs() + self.config.eps;
        for &i in indices {
            let len = self.items.len();
            let t = self.items.get_mut(i).ok_or(Error::DimensionMismatch {
                expected: len,
                actual: i,
            })?;
            t.priority = stamp;
        }
        self.theta_norm_now = theta_norm_now;
        Ok(())
    }

    /// Dissimilarity of transition `i` against the last recorded norm.
    pub fn rho(&self, i: usize) -> Option<f64> {
        self.items
            .get(i)
            .and_then(|t| dissimilarity(self.theta_norm_now, t.theta_norm_sq).ok())
    }
}
