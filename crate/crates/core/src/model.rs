//! Physical system model: UEs, MEC servers, channel gains, Shannon rates and
//! the weighted task-latency objective.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A computation task held by one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// CPU cycles needed to finish the task.
    pub cycles: f64,
    /// Upload size in bits when offloaded.
    pub data_bits: f64,
    /// Priority weight in the objective.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    pub position: Position,
    pub task: Task,
    /// Local CPU ceiling, cycles/s.
    pub f_local_max: f64,
    /// Power budget, watts.
    pub p_ue_max: f64,
    /// Effective switched capacitance.
    pub kappa: f64,
    /// Exponent of the local power law `p = kappa * f^v`.
    pub v_exp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MecSpec {
    pub position: Position,
    /// Server CPU capacity shared by its tasks, cycles/s.
    pub f_mec_max: f64,
}

/// Small-scale fading model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    /// Exponential power with unit mean (Rayleigh amplitude).
    #[default]
    Rayleigh,
    /// `l = 1` everywhere.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    /// Channel power gain at the 1 m reference distance.
    pub beta0: f64,
    /// Distances are clamped below at this value.
    pub min_distance: f64,
    pub fading: Fading,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e6,
            noise_w: 1e-10,
            beta0: 1e-3,
            min_distance: 1.0,
            fading: Fading::Rayleigh,
        }
    }
}

/// Immutable description of one MEC deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ues: Vec<UeSpec>,
    pub mecs: Vec<MecSpec>,
    pub radio: RadioParams,
    /// Side length of the square deployment area, meters.
    pub area_m: f64,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn n_mecs(&self) -> usize {
        self.mecs.len()
    }

    /// Number of placements per UE: local plus one per server.
    pub fn n_placements(&self) -> usize {
        self.mecs.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.ues.is_empty() {
            return bad("at least one UE is required".into());
        }
        if self.mecs.is_empty() {
            return bad("at least one MEC server is required".into());
        }
        let r = &self.radio;
        if !(r.bandwidth_hz > 0.0 && r.noise_w > 0.0 && r.beta0 > 0.0 && r.min_distance > 0.0) {
            return bad("radio parameters must be positive".into());
        }
        if !(self.area_m > 0.0) {
            return bad("area must be positive".into());
        }
        let inside = |p: &Position| {
            p.x.is_finite()
                && p.y.is_finite()
                && (0.0..=self.area_m).contains(&p.x)
                && (0.0..=self.area_m).contains(&p.y)
        };
        for (i, ue) in self.ues.iter().enumerate() {
            let t = &ue.task;
            if !(t.cycles > 0.0 && t.data_bits > 0.0 && t.weight > 0.0) {
                return bad(format!(
                    "UE {i}: task cycles, data and weight must be positive"
                ));
            }
            if !(ue.f_local_max > 0.0 && ue.p_ue_max > 0.0) {
                return bad(format!(
                    "UE {i}: local capacity and power budget must be positive"
                ));
            }
            if !(ue.kappa >= 0.0 && ue.v_exp >= 1.0) {
                return bad(format!("UE {i}: kappa must be >= 0 and v >= 1"));
            }
            if !inside(&ue.position) {
                return bad(format!("UE {i} lies outside the area"));
            }
        }
        for (j, mec) in self.mecs.iter().enumerate() {
            if !(mec.f_mec_max > 0.0) {
                return bad(format!("MEC {j}: capacity must be positive"));
            }
            if !inside(&mec.position) {
                return bad(format!("MEC {j} lies outside the area"));
            }
        }
        Ok(())
    }

    /// Copy of the scenario with every task weight replaced.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Scenario> {
        if weights.len() != self.ues.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ues.len(),
                actual: weights.len(),
            });
        }
        let mut out = self.clone();
        for (ue, &w) in out.ues.iter_mut().zip(weights) {
            ue.task.weight = w;
        }
        out.validate()?;
        Ok(out)
    }
}

/// N×M matrix of channel power gains at one epoch, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    gains: Vec<f64>,
    n_ues: usize,
    n_mecs: usize,
    pub epoch: u64,
}

impl ChannelState {
    pub fn new(gains: Vec<f64>, n_ues: usize, n_mecs: usize, epoch: u64) -> Result<Self> {
        if gains.len() != n_ues * n_mecs {
            return Err(Error::DimensionMismatch {
                expected: n_ues * n_mecs,
                actual: gains.len(),
            });
        }
        if gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidScenario(
                "channel gains must be positive and finite".into(),
            ));
        }
        Ok(Self {
            gains,
            n_ues,
            n_mecs,
            epoch,
        })
    }

    #[inline]
    pub fn gain(&self, ue: usize, mec: usize) -> f64 {
        self.gains[ue * self.n_mecs + mec]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.gains[ue * self.n_mecs..(ue + 1) * self.n_mecs]
    }

    /// Row-major gains; entry `(i, j)` is at `i * M + j`.
    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn n_mecs(&self) -> usize {
        self.n_mecs
    }
}

/// Placement per UE: `0` runs locally, `k` offloads to MEC `k` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OffloadDecision(Vec<usize>);

impl OffloadDecision {
    pub fn new(assign: Vec<usize>, n_mecs: usize) -> Result<Self> {
        if let Some((i, &a)) = assign.iter().enumerate().find(|(_, &a)| a > n_mecs) {
            return Err(Error::Infeasible(format!(
                "UE {i} assigned to placement {a}, only {n_mecs} servers"
            )));
        }
        Ok(Self(assign))
    }

    pub fn all_local(n_ues: usize) -> Self {
        Self(vec![0; n_ues])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn placement(&self, ue: usize) -> usize {
        self.0[ue]
    }

    /// Server index (0-based) for an offloaded UE.
    #[inline]
    pub fn server(&self, ue: usize) -> Option<usize> {
        self.0[ue].checked_sub(1)
    }

    pub(crate) fn set(&mut self, ue: usize, placement: usize) {
        self.0[ue] = placement;
    }

    /// Binary `a_ij` matrix with `M + 1` columns, column 0 = local.
    pub fn to_matrix(&self, n_mecs: usize) -> Vec<Vec<u8>> {
        self.0
            .iter()
            .map(|&a| {
                let mut row = vec![0u8; n_mecs + 1];
                row[a] = 1;
                row
            })
            .collect()
    }

    /// Inverse of [`to_matrix`](Self::to_matrix); every row must hold exactly one 1.
    pub fn from_matrix(matrix: &[Vec<u8>]) -> Result<Self> {
        let mut assign = Vec::with_capacity(matrix.len());
        let mut width = None;
        for (i, row) in matrix.iter().enumerate() {
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: width.unwrap_or(0),
                    actual: row.len(),
                });
            }
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1)
                .map(|(j, _)| j)
                .collect();
            if ones.len() != 1 || row.iter().any(|&v| v > 1) {
                return Err(Error::Infeasible(format!(
                    "row {i} must contain exactly one placement"
                )));
            }
            assign.push(ones[0]);
        }
        let n_mecs = width.unwrap_or(1).saturating_sub(1);
        Self::new(assign, n_mecs)
    }
}

/// Horizontal UE–server distance, clamped below at `radio.min_distance`.
pub fn distance(ue: &UeSpec, mec: &MecSpec, radio: &RadioParams) -> f64 {
    let dx = mec.position.x - ue.position.x;
    let dy = mec.position.y - ue.position.y;
    dx.hypot(dy).max(radio.min_distance)
}

/// One small-scale fading draw with unit mean.
pub fn sample_fading<R: Rng + ?Sized>(fading: Fading, rng: &mut R) -> f64 {
    match fading {
        Fading::Deterministic => 1.0,
        Fading::Rayleigh => {
            let l: f64 = Exp1.sample(rng);
            // Exp1 can return exactly 0 with negligible probability.
            l.max(f64::MIN_POSITIVE)
        }
    }
}

/// `beta0 * l / R^2`.
pub fn channel_gain(scenario: &Scenario, ue: usize, mec: usize, fading: f64) -> f64 {
    let r = distance(&scenario.ues[ue], &scenario.mecs[mec], &scenario.radio);
    scenario.radio.beta0 * fading / (r * r)
}

/// Fresh N×M channel matrix with one fading draw per entry.
pub fn sample_channel_state<R: Rng + ?Sized>(
    scenario: &Scenario,
    epoch: u64,
    rng: &mut R,
) -> ChannelState {
    let (n, m) = (scenario.n_ues(), scenario.n_mecs());
    let mut gains = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let l = sample_fading(scenario.radio.fading, rng);
            gains.push(channel_gain(scenario, i, j, l));
        }
    }
    ChannelState {
        gains,
        n_ues: n,
        n_mecs: m,
        epoch,
    }
}

/// Channel matrix as a pure function of `(scenario, epoch, seed)`.
pub fn channel_at(scenario: &Scenario, epoch: u64, seed: u64) -> ChannelState {
    let mut rng = rng::substream(seed, Stream::Channel, epoch);
    sample_channel_state(scenario, epoch, &mut rng)
}

/// Shannon rate `B log2(1 + p h / sigma^2)` in bits/s.
pub fn data_rate(p_tx: f64, gain: f64, radio: &RadioParams) -> f64 {
    radio.bandwidth_hz * (p_tx * gain / radio.noise_w).ln_1p() / std::f64::consts::LN_2
}

/// Weighted sum of task latencies for a decision and its allocation.
///
/// Offloaded UEs pay upload time plus remote compute time; local UEs pay local
/// compute time only.
pub fn weighted_latency(
    scenario: &Scenario,
    decision: &OffloadDecision,
    freqs: &[f64],
    powers: &[f64],
    channel: &ChannelState,
) -> Result<f64> {
    let n = scenario.n_ues();
    for len in [decision.len(), freqs.len(), powers.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let mut total = 0.0;
    for (i, ue) in scenario.ues.iter().enumerate() {
        let f = freqs[i];
        if !(f > 0.0) {
            return Err(Error::Infeasible(format!(
                "UE {i} has non-positive frequency {f}"
            )));
        }
        let compute = ue.task.cycles / f;
        let latency = match decision.server(i) {
            None => compute,
            Some(j) => {
                let rate = data_rate(powers[i], channel.gain(i, j), &scenario.radio);
                if !(rate > 0.0) {
                    return Err(Error::Infeasible(format!("UE {i} has zero uplink rate")));
                }
                ue.task.data_bits / rate + compute
            }
        };
        total += ue.task.weight * latency;
    }
    Ok(total)
}
