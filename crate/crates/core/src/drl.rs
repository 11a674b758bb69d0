//! Policy network and the online training loop.
//!
//! Every epoch the channel is compressed by the SAE, the policy proposes an
//! offloading vector (the online answer, scored immediately), and a local
//! search started from that proposal produces the training label. Labels go
//! into the replay buffer; every `phi` epochs the policy takes one Adam step
//! on a prioritized batch.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator;
use crate::asa::{self, AsaConfig, AsaState};
use crate::error::{Error, Result};
use crate::model::{channel_at, ChannelState, OffloadDecision, Scenario};
use crate::neural::{Activation, AdamState, Gradients, Network};
use crate::replay::{ReplayBuffer, ReplayConfig, Transition};
use crate::rng::{self, Stream};
use crate::sae::{EncodedState, Sae};

const PROB_CLAMP: f64 = 1e-12;

/// How training labels are produced from the policy's proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Channel-guided annealing with the adaptive budget.
    #[default]
    Asa,
    /// Best of `t_sa` uniform random decisions and the proposal.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrlConfig {
    /// Hidden widths; input is the SAE code size and output is `N (M + 1)`.
    pub dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub lambda: f64,
    pub t_drl: u64,
    /// Epochs between training events.
    pub phi: u64,
    pub batch: usize,
    pub learning_rate: f64,
    /// Adam steps per training event.
    pub updates_per_train: usize,
    /// Epoch at which task weights are redrawn from `U[0.5, 1.5]`.
    pub weight_shift_epoch: Option<u64>,
    pub search: SearchMode,
    /// Probability of replacing the proposal by a random decision.
    pub explore_eps: f64,
    /// Fill the wall-time columns of the epoch log. Off by default so logs
    /// stay byte-reproducible.
    pub record_timing: bool,
}

impl Default for DrlConfig {
    fn default() -> Self {
        Self {
            dims: vec![120, 80],
            hidden_activation: Activation::Relu,
            lambda: 0.02,
            t_drl: 3000,
            phi: 10,
            batch: 64,
            learning_rate: 1e-3,
            updates_per_train: 1,
            weight_shift_epoch: None,
            search: SearchMode::Asa,
            explore_eps: 0.0,
            record_timing: false,
        }
    }
}

impl DrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phi == 0 {
            return Err(Error::InvalidConfig("drl.phi must be at least 1".into()));
        }
        if self.batch == 0 || self.updates_per_train == 0 {
            return Err(Error::InvalidConfig(
                "drl.batch and drl.updates_per_train must be positive".into(),
            ));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "drl.dims entries must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "drl.lambda must be >= 0 and learning_rate > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.explore_eps) {
            return Err(Error::InvalidConfig(
                "drl.explore_eps must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Layer specs for a policy reading `code_dim` inputs.
    pub fn policy_specs(
        &self,
        code_dim: usize,
        n_ues: usize,
        n_mecs: usize,
    ) -> Vec<crate::neural::LayerSpec> {
        let mut widths = vec![code_dim];
        widths.extend(&self.dims);
        widths.push(n_ues * (n_mecs + 1));
        Network::chain(&widths, self.hidden_activation, Activation::Sigmoid)
    }
}

/// One row of `epochs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u64,
    /// Reward of the online (pre-search) decision.
    pub reward: f64,
    pub latency: f64,
    /// Most recent policy loss; empty before the first training event.
    pub loss: Option<f64>,
    /// Loss decrease at this epoch's training event, 0 otherwise.
    pub delta_loss: f64,
    /// Search budget used this epoch.
    pub t_sa: usize,
    pub decision_ms: f64,
    pub asa_ms: f64,
}

pub fn write_epochs(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for log in logs {
        w.serialize(log)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_epochs(path: &Path) -> Result<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Per-UE argmax over `M + 1` outputs; ties go to the lowest placement.
pub fn decode(outputs: &[f64], n_ues: usize, n_mecs: usize) -> Result<OffloadDecision> {
    let k = n_mecs + 1;
    if outputs.len() != n_ues * k {
        return Err(Error::DimensionMismatch {
            expected: n_ues * k,
            actual: outputs.len(),
        });
    }
    let assign = outputs
        .chunks_exact(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |b, (j, &v)| if v > b.1 { (j, v) } else { b },
                )
                .0
        })
        .collect();
    OffloadDecision::new(assign, n_mecs)
}

/// Policy inference for one encoded state.
pub fn decide(
    policy: &Network,
    state: &EncodedState,
    scenario: &Scenario,
) -> Result<OffloadDecision> {
    let out = policy.predict(&state.values)?;
    decode(&out, scenario.n_ues(), scenario.n_mecs())
}

/// One-hot target of length `N (M + 1)`.
pub fn one_hot(decision: &OffloadDecision, n_mecs: usize) -> Vec<f64> {
    let k = n_mecs + 1;
    let mut y = vec![0.0; decision.len() * k];
    for (i, &a) in decision.as_slice().iter().enumerate() {
        y[i * k + a] = 1.0;
    }
    y
}

/// Binary cross-entropy summed over outputs, with clamped probabilities.
pub fn cross_entropy(outputs: &[f64], target: &[f64]) -> f64 {
    outputs
        .iter()
        .zip(target)
        .map(|(&a, &y)| {
            let a = a.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * a.ln() + (1.0 - y) * (1.0 - a).ln())
        })
        .sum()
}

/// Mean cross-entropy over the batch plus `(lambda / 2) ||theta||^2`.
pub fn policy_loss(policy: &Network, batch: &[(Vec<f64>, Vec<f64>)], lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut total = 0.0;
    for (x, y) in batch {
        total += cross_entropy(&policy.predict(x)?, y);
    }
    Ok(total / batch.len() as f64 + 0.5 * lambda * policy.l2_norm_sq())
}

/// [`policy_loss`] together with its parameter gradient.
pub fn policy_loss_with_grad(
    policy: &Network,
    batch: &[(Vec<f64>, Vec<f64>)],
    lambda: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut grads = Gradients::zeros_like(policy);
    let mut total = 0.0;
    for (x, y) in batch {
        let (a, cache) = policy.forward(x)?;
        if y.len() != a.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: y.len(),
            });
        }
        total += cross_entropy(&a, y);
        let upstream: Vec<f64> = a
            .iter()
            .zip(y)
            .map(|(&a, &y)| {
                let a = a.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -y / a + (1.0 - y) / (1.0 - a)
            })
            .collect();
        let (g, _) = policy.backward(&cache, &upstream)?;
        grads.accumulate(&g, 0);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    grads.add_l2(policy, lambda);
    Ok((total * inv + 0.5 * lambda * policy.l2_norm_sq(), grads))
}

/// Bookkeeping returned by [`train_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStamp {
    pub loss: f64,
    pub delta_loss: f64,
    pub theta_norm_sq: f64,
}

/// Samples a prioritized batch, takes the configured Adam steps and restamps
/// the sampled transitions. `prev_loss` is the previous training event's loss.
///
/// Transitions encoded by an older encoder are re-encoded first. An empty
/// buffer is a no-op with zero loss decrease.
#[allow(clippy::too_many_arguments)]
pub fn train_step<R: Rng + ?Sized>(
    policy: &mut Network,
    adam: &mut AdamState,
    buffer: &mut ReplayBuffer,
    sae: &Sae,
    n_mecs: usize,
    config: &DrlConfig,
    prev_loss: Option<f64>,
    rng: &mut R,
) -> Result<Option<TrainStamp>> {
    if buffer.is_empty() {
        return Ok(None);
    }
    let indices = buffer.sample(config.batch, rng)?;
    for &i in &indices {
        let t = buffer.get_mut(i).expect("sampled index in range");
        if t.encoder_version != sae.version {
            t.state = sae.encode_vector(&sae.rasterize(&raw_channel(t, n_mecs)?), t.state.epoch)?;
            t.encoder_version = sae.version;
        }
    }
    let batch: Vec<(Vec<f64>, Vec<f64>)> = indices
        .iter()
        .map(|&i| {
            let t = buffer.get(i).expect("sampled index in range");
            (t.state.values.clone(), one_hot(&t.best_action, n_mecs))
        })
        .collect();
    let mut loss = f64::NAN;
    for k in 0..config.updates_per_train {
        let (l, grads) = policy_loss_with_grad(policy, &batch, config.lambda)?;
        if k == 0 {
            loss = l;
        }
        adam.step(policy, &grads);
    }
    if !loss.is_finite() || !policy.is_finite() {
        return Err(Error::NonFiniteLoss(adam.step as usize));
    }
    let delta_loss = prev_loss.map_or(0.0, |p| p - loss);
    let theta_norm_sq = policy.l2_norm_sq();
    buffer.update_stats(&indices, delta_loss, theta_norm_sq)?;
    Ok(Some(TrainStamp {
        loss,
        delta_loss,
        theta_norm_sq,
    }))
}

fn raw_channel(t: &Transition, n_mecs: usize) -> Result<ChannelState> {
    ChannelState::new(
        t.channel.clone(),
        t.channel.len() / n_mecs.max(1),
        n_mecs,
        t.state.epoch,
    )
}

/// Best of `budget` uniform decisions and `initial`.
pub fn random_search<R: Rng + ?Sized>(
    initial: &OffloadDecision,
    channel: &ChannelState,
    scenario: &Scenario,
    budget: usize,
    rng: &mut R,
) -> Result<(OffloadDecision, f64)> {
    let mut best = initial.clone();
    let mut f_best = allocator::objective(&best, scenario, channel)?;
    for _ in 0..budget {
        let cand = random_decision(scenario, rng)?;
        let f = allocator::objective(&cand, scenario, channel)?;
        if f < f_best {
            best = cand;
            f_best = f;
        }
    }
    Ok((best, f_best))
}

/// Uniform placement over `{0..=M}` for every UE.
pub fn random_decision<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<OffloadDecision> {
    let m = scenario.n_mecs();
    OffloadDecision::new(
        (0..scenario.n_ues())
            .map(|_| rng.random_range(0..=m))
            .collect(),
        m,
    )
}

/// Everything produced by one epoch of [`Agent::step`].
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub log: EpochLog,
    pub channel: ChannelState,
    pub decision: OffloadDecision,
    /// Search label used for training.
    pub label: OffloadDecision,
}

/// Full component stack of one training run.
#[derive(Debug, Clone)]
pub struct Agent {
    scenario: Scenario,
    pub sae: Sae,
    pub policy: Network,
    adam: AdamState,
    pub replay: ReplayBuffer,
    pub asa_state: AsaState,
    pub drl: DrlConfig,
    pub asa: AsaConfig,
    seed: u64,
    last_loss: Option<f64>,
    asa_rng: rng::Rng,
    replay_rng: rng::Rng,
    explore_rng: rng::Rng,
    sae_rng: rng::Rng,
}

impl Agent {
    pub fn new(
        scenario: Scenario,
        sae: Sae,
        drl: DrlConfig,
        asa: AsaConfig,
        replay: ReplayConfig,
        seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        drl.validate()?;
        asa.validate()?;
        if sae.n_ues != scenario.n_ues() || sae.n_mecs != scenario.n_mecs() {
            return Err(Error::InvalidConfig(
                "SAE dimensions do not match the scenario".into(),
            ));
        }
        let specs = drl.policy_specs(sae.code_dim(), scenario.n_ues(), scenario.n_mecs());
        let policy = Network::new(&specs, seed, &mut rng::stream(seed, Stream::PolicyInit))?;
        let adam = AdamState::new(&policy, drl.learning_rate);
        Ok(Self {
            scenario,
            sae,
            policy,
            adam,
            replay: ReplayBuffer::new(replay)?,
            asa_state: AsaState::new(&asa),
            drl,
            asa,
            seed,
            last_loss: None,
            asa_rng: rng::stream(seed, Stream::Asa),
            replay_rng: rng::stream(seed, Stream::Replay),
            explore_rng: rng::stream(seed, Stream::Baseline),
            sae_rng: rng::stream(seed, Stream::Sae),
        })
    }

    /// Scenario in force, including any weight shift already applied.
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Online decision for an arbitrary channel, without side effects.
    pub fn decide(&self, channel: &ChannelState) -> Result<OffloadDecision> {
        decide(&self.policy, &self.sae.encode(channel)?, &self.scenario)
    }

    /// Redraws every task weight from `U[0.5, 1.5]`.
    pub fn shift_weights(&mut self) -> Result<()> {
        let mut r = rng::stream(self.seed, Stream::WeightShift);
        let w: Vec<f64> = (0..self.scenario.n_ues())
            .map(|_| r.random_range(0.5..1.5))
            .collect();
        self.scenario = self.scenario.with_weights(&w)?;
        Ok(())
    }

    /// Runs epoch `t` (1-based).
    pub fn step(&mut self, t: u64) -> Result<EpochOutcome> {
        if self.drl.weight_shift_epoch == Some(t) {
            self.shift_weights()?;
        }
        let channel = channel_at(&self.scenario, t, self.seed);
        let sync = self.sae.config.sync_period;
        if sync > 0 {
            self.sae.observe(&channel)?;
            if t.is_multiple_of(sync) {
                let iters = self.sae.config.t_sae_incremental;
                self.sae.train(iters, &mut self.sae_rng)?;
                self.sae.sync();
            }
        }

        let clock = Instant::now();
        let state = self.sae.encode(&channel)?;
        let mut decision = decide(&self.policy, &state, &self.scenario)?;
        if self.drl.explore_eps > 0.0 && self.explore_rng.random::<f64>() < self.drl.explore_eps {
            decision = random_decision(&self.scenario, &mut self.explore_rng)?;
        }
        let alloc = allocator::evaluate(&decision, &self.scenario, &channel)?;
        let decision_ms = clock.elapsed().as_secs_f64() * 1e3;

        let clock = Instant::now();
        let budget = self.asa_state.budget;
        let label = match self.drl.search {
            SearchMode::Asa => {
                asa::search(
                    &decision,
                    &channel,
                    &self.scenario,
                    &self.asa,
                    budget,
                    &mut self.asa_rng,
                )?
                .best
            }
            SearchMode::Random => {
                random_search(
                    &decision,
                    &channel,
                    &self.scenario,
                    budget,
                    &mut self.asa_rng,
                )?
                .0
            }
        };
        let asa_ms = clock.elapsed().as_secs_f64() * 1e3;

        let theta = self.policy.l2_norm_sq();
        self.replay.append(
            Transition {
                state,
                channel: channel.as_slice().to_vec(),
                encoder_version: self.sae.version,
                best_action: label.clone(),
                theta_norm_sq: theta,
                priority: 1.0,
                collect_epoch: t,
            },
            theta,
        );

        let mut delta_loss = 0.0;
        if t.is_multiple_of(self.drl.phi) {
            let stamp = train_step(
                &mut self.policy,
                &mut self.adam,
                &mut self.replay,
                &self.sae,
                self.scenario.n_mecs(),
                &self.drl,
                self.last_loss,
                &mut self.replay_rng,
            )?;
            if let Some(s) = stamp {
                delta_loss = s.delta_loss;
                self.last_loss = Some(s.loss);
                if self.drl.search == SearchMode::Asa {
                    asa::adapt_budget(
                        &mut self.asa_state,
                        s.delta_loss,
                        self.asa.epsilon,
                        self.asa.t_sa_max,
                    );
                }
            }
        }
        self.policy.epoch = t;

        let (decision_ms, asa_ms) = if self.drl.record_timing {
            (decision_ms, asa_ms)
        } else {
            (0.0, 0.0)
        };
        let log = EpochLog {
            epoch: t,
            reward: alloc.reward,
            latency: alloc.latency,
            loss: self.last_loss,
            delta_loss,
            t_sa: budget,
            decision_ms,
            asa_ms,
        };
        Ok(EpochOutcome {
            log,
            channel,
            decision,
            label,
        })
    }

    /// Runs epochs `1..=t_drl`, handing every outcome to `observe`.
    pub fn run(
        &mut self,
        mut observe: impl FnMut(&Agent, &EpochOutcome) -> Result<()>,
    ) -> Result<Vec<EpochLog>> {
        let mut logs = Vec::with_capacity(self.drl.t_drl as usize);
        for t in 1..=self.drl.t_drl {
            let out = self.step(t)?;
            observe(self, &out)?;
            logs.push(out.log);
        }
        Ok(logs)
    }
}
