//! Adaptive simulated annealing over integer offloading vectors.
//!
//! Neighbours come from channel-guided mutation: a UE sitting on a server
//! that holds most of its channel gain is unlikely to be moved. Candidates are
//! scored by the exact inner allocation and accepted by the Boltzmann rule
//! under geometric cooling. The iteration budget grows while the policy loss
//! is still dropping quickly and shrinks once it stalls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator;
use crate::error::{Error, Result};
use crate::model::{ChannelState, OffloadDecision, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsaConfig {
    /// Initial temperature, in objective units (seconds).
    pub t0: f64,
    /// Geometric cooling factor in (0, 1).
    pub phi_cool: f64,
    /// Initial iteration budget.
    pub t_sa: usize,
    /// Loss-decrease threshold for growing the budget.
    pub epsilon: f64,
    /// Budget ceiling.
    pub t_sa_max: usize,
}

impl Default for AsaConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            phi_cool: 0.95,
            t_sa: 20,
            epsilon: 0.02,
            t_sa_max: 100,
        }
    }
}

impl AsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_cool > 0.0 && self.phi_cool < 1.0) {
            return Err(Error::InvalidConfig(
                "asa.phi_cool must lie in (0, 1)".into(),
            ));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidConfig("asa.t0 must be positive".into()));
        }
        if self.t_sa == 0 || self.t_sa > self.t_sa_max {
            return Err(Error::InvalidConfig(
                "asa.t_sa must lie in [1, t_sa_max]".into(),
            ));
        }
        Ok(())
    }
}

/// Iteration budget carried across DRL epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsaState {
    pub budget: usize,
}

impl AsaState {
    pub fn new(config: &AsaConfig) -> Self {
        Self {
            budget: config.t_sa.clamp(1, config.t_sa_max.max(1)),
        }
    }
}

/// Probability that gene `ue` survives mutation.
///
/// For an offloaded UE this is the share of its total channel gain held by
/// its current server. Local genes use `1 / (M + 1)`.
pub fn mutation_prob(channel: &ChannelState, solution: &OffloadDecision, ue: usize) -> f64 {
    match solution.server(ue) {
        None => 1.0 / (channel.n_mecs() + 1) as f64,
        Some(j) => {
            let row = channel.row(ue);
            row[j] / row.iter().sum::<f64>()
        }
    }
}

/// Channel-guided neighbour of `solution`.
///
/// Each gene is redrawn uniformly over `{0..=M}` when a uniform draw exceeds
/// its survival probability. If nothing changed, one random gene is forced to
/// a different placement.
pub fn h_mutate<R: Rng + ?Sized>(
    solution: &OffloadDecision,
    channel: &ChannelState,
    rng: &mut R,
) -> OffloadDecision {
    let probs: Vec<f64> = (0..solution.len())
        .map(|i| mutation_prob(channel, solution, i))
        .collect();
    h_mutate_with(solution, &probs, channel.n_mecs(), rng)
}

/// [`h_mutate`] with explicit survival probabilities.
pub fn h_mutate_with<R: Rng + ?Sized>(
    solution: &OffloadDecision,
    survival: &[f64],
    n_mecs: usize,
    rng: &mut R,
) -> OffloadDecision {
    let mut next = solution.clone();
    for (i, &p) in survival.iter().enumerate() {
        if rng.random::<f64>() > p {
            next.set(i, rng.random_range(0..=n_mecs));
        }
    }
    if next == *solution && !solution.is_empty() && n_mecs > 0 {
        let i = rng.random_range(0..solution.len());
        // Uniform over the M placements other than the current one.
        let shift = rng.random_range(1..=n_mecs);
        next.set(i, (solution.placement(i) + shift) % (n_mecs + 1));
    }
    next
}

/// Boltzmann acceptance for minimisation.
pub fn accept<R: Rng + ?Sized>(f_old: f64, f_new: f64, temperature: f64, rng: &mut R) -> bool {
    ((f_old - f_new) / temperature).exp() > rng.random::<f64>()
}

/// Budget update driven by the latest policy-loss decrease.
pub fn adapt_budget(state: &mut AsaState, delta_loss: f64, epsilon: f64, t_sa_max: usize) {
    state.budget = if delta_loss >= epsilon {
        state.budget + 1
    } else if state.budget != 1 {
        state.budget - 1
    } else {
        1
    }
    .clamp(1, t_sa_max.max(1));
}

/// Result of one annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct AsaOutcome {
    pub best: OffloadDecision,
    pub best_objective: f64,
    /// Best objective after each iteration (index 0 is the initial solution).
    pub trace: Vec<f64>,
}

/// Anneals from `initial` for `budget` iterations and returns the best
/// solution visited, the initial one included.
pub fn search<R: Rng + ?Sized>(
    initial: &OffloadDecision,
    channel: &ChannelState,
    scenario: &Scenario,
    config: &AsaConfig,
    budget: usize,
    rng: &mut R,
) -> Result<AsaOutcome> {
    let mut current = initial.clone();
    let mut f_current = allocator::objective(&current, scenario, channel)?;
    let mut best = current.clone();
    let mut f_best = f_current;
    let mut trace = Vec::with_capacity(budget + 1);
    trace.push(f_best);
    let mut temperature = config.t0;
    for _ in 0..budget {
        temperature *= config.phi_cool;
        let candidate = h_mutate(&current, channel, rng);
        let f_candidate = allocator::objective(&candidate, scenario, channel)?;
        if accept(f_current, f_candidate, temperature, rng) {
            current = candidate;
            f_current = f_candidate;
            if f_current < f_best {
                best = current.clone();
                f_best = f_current;
            }
        }
        trace.push(f_best);
    }
    Ok(AsaOutcome {
        best,
        best_objective: f_best,
        trace,
    })
}
