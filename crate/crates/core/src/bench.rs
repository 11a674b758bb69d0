//! Baselines, the PSO reference solver and the experiment drivers.

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator;
use crate::asa::{self, AsaConfig};
use crate::config::ExperimentConfig;
use crate::drl::{self, Agent, EpochLog};
use crate::error::{Error, Result};
use crate::model::{
    channel_at, data_rate, distance, sample_channel_state, ChannelState, OffloadDecision, Scenario,
};
use crate::neural::Network;
use crate::rng::{self, Stream};
use crate::sae::{Normalizer, Sae};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Finish with one- and two-gene descent from the swarm's best.
    pub polish: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 50,
            iterations: 300,
            inertia: 0.72,
            c1: 1.49,
            c2: 1.49,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Held-out channels per replication.
    pub eval_channels: usize,
    /// One scenario draw and training run per seed.
    pub replications: Vec<u64>,
    /// Fixed budget of the ASA-only baseline.
    pub asa_budget: usize,
    pub pso: PsoConfig,
    /// Epochs between NRR probes during dynamic runs.
    pub nrr_interval: u64,
    pub mec_counts: Vec<usize>,
    /// Measure wall times; off gives byte-reproducible reports.
    pub timing: bool,
    /// Channels used to score SAE reconstruction accuracy.
    pub sae_test_channels: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            eval_channels: 200,
            replications: vec![1, 2, 3],
            asa_budget: 100,
            pso: PsoConfig::default(),
            nrr_interval: 50,
            mec_counts: vec![1, 2, 3, 4, 5],
            timing: true,
            sae_test_channels: 200,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_channels == 0 || self.replications.is_empty() {
            return Err(Error::InvalidConfig(
                "bench needs eval_channels > 0 and at least one replication".into(),
            ));
        }
        if self.nrr_interval == 0 || self.pso.particles == 0 {
            return Err(Error::InvalidConfig(
                "bench.nrr_interval and pso.particles must be positive".into(),
            ));
        }
        if self.mec_counts.contains(&0) {
            return Err(Error::InvalidConfig(
                "bench.mec_counts entries must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn nearest_mec(scenario: &Scenario, ue: usize) -> usize {
    let u = &scenario.ues[ue];
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, m) in scenario.mecs.iter().enumerate() {
        let d = distance(u, m, &scenario.radio);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Moves UEs to local execution, largest task first, while some server's
/// equal-share remote latency exceeds a member's local latency.
pub fn fallback_insufficient(
    assign: &mut [usize],
    scenario: &Scenario,
    channel: &ChannelState,
) -> Result<()> {
    let local: Vec<f64> = scenario
        .ues
        .iter()
        .map(|u| allocator::local_capacity(u).map(|f| u.task.cycles / f))
        .collect::<Result<_>>()?;
    for j in 0..scenario.n_mecs() {
        loop {
            let members: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] == j + 1).collect();
            if members.is_empty() {
                break;
            }
            let share = scenario.mecs[j].f_mec_max / members.len() as f64;
            let insufficient = members.iter().any(|&i| {
                let u = &scenario.ues[i];
                let rate = data_rate(u.p_ue_max, channel.gain(i, j), &scenario.radio);
                u.task.data_bits / rate + u.task.cycles / share > local[i]
            });
            if !insufficient {
                break;
            }
            let victim = members
                .iter()
                .copied()
                .fold(None::<usize>, |b, i| match b {
                    Some(k) if scenario.ues[k].task.cycles >= scenario.ues[i].task.cycles => {
                        Some(k)
                    }
                    _ => Some(i),
                })
                .expect("members is non-empty");
            assign[victim] = 0;
        }
    }
    Ok(())
}

/// Nearest server for everyone, then the insufficiency fallback.
pub fn greedy_baseline(scenario: &Scenario, channel: &ChannelState) -> Result<OffloadDecision> {
    let mut assign: Vec<usize> = (0..scenario.n_ues())
        .map(|i| nearest_mec(scenario, i) + 1)
        .collect();
    fallback_insufficient(&mut assign, scenario, channel)?;
    OffloadDecision::new(assign, scenario.n_mecs())
}

/// Uniform placement, then the insufficiency fallback.
pub fn random_baseline<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelState,
    rng: &mut R,
) -> Result<OffloadDecision> {
    let mut assign = drl::random_decision(scenario, rng)?.as_slice().to_vec();
    fallback_insufficient(&mut assign, scenario, channel)?;
    OffloadDecision::new(assign, scenario.n_mecs())
}

/// Annealing from a random start with a fixed budget.
pub fn asa_only<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelState,
    config: &AsaConfig,
    budget: usize,
    rng: &mut R,
) -> Result<OffloadDecision> {
    let start = drl::random_decision(scenario, rng)?;
    Ok(asa::search(&start, channel, scenario, config, budget, rng)?.best)
}

fn round_clamp(x: &[f64], n_mecs: usize) -> Vec<usize> {
    x.iter()
        .map(|v| v.round().clamp(0.0, n_mecs as f64) as usize)
        .collect()
}

/// Discrete PSO over placement vectors with round-and-clamp decoding.
///
/// One particle starts from the greedy decision. With `polish` set, the
/// swarm's best is refined by first-improvement one- and two-gene moves.
pub fn pso_oracle<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelState,
    config: &PsoConfig,
    rng: &mut R,
) -> Result<(OffloadDecision, f64)> {
    let n = scenario.n_ues();
    let m = scenario.n_mecs();
    let hi = m as f64;
    let eval = |x: &[f64]| -> Result<(Vec<usize>, f64)> {
        let a = round_clamp(x, m);
        let f = allocator::objective(&OffloadDecision::new(a.clone(), m)?, scenario, channel)?;
        Ok((a, f))
    };
    let mut pos: Vec<Vec<f64>> = (0..config.particles)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..=hi)).collect())
        .collect();
    pos[0] = greedy_baseline(scenario, channel)?
        .as_slice()
        .iter()
        .map(|&a| a as f64)
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..config.particles)
        .map(|_| (0..n).map(|_| rng.random_range(-hi..=hi)).collect())
        .collect();
    let mut pbest = pos.clone();
    let mut pbest_f = Vec::with_capacity(config.particles);
    let mut gbest = pos[0].clone();
    let mut gbest_f = f64::INFINITY;
    for p in &pos {
        let (_, f) = eval(p)?;
        if f < gbest_f {
            gbest_f = f;
            gbest = p.clone();
        }
        pbest_f.push(f);
    }
    for _ in 0..config.iterations {
        for k in 0..config.particles {
            for d in 0..n {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = config.inertia * vel[k][d]
                    + config.c1 * r1 * (pbest[k][d] - pos[k][d])
                    + config.c2 * r2 * (gbest[d] - pos[k][d]);
                vel[k][d] = v.clamp(-hi, hi);
                pos[k][d] = (pos[k][d] + vel[k][d]).clamp(0.0, hi);
            }
            let (_, f) = eval(&pos[k])?;
            if f < pbest_f[k] {
                pbest_f[k] = f;
                pbest[k] = pos[k].clone();
                if f < gbest_f {
                    gbest_f = f;
                    gbest = pos[k].clone();
                }
            }
        }
    }
    let mut best = round_clamp(&gbest, m);
    if config.polish {
        let score = |a: &[usize]| -> Result<f64> {
            allocator::objective(&OffloadDecision::new(a.to_vec(), m)?, scenario, channel)
        };
        // Single-gene moves to a local optimum, then one improving
        // two-gene move (which covers swaps); repeat until neither helps.
        'outer: loop {
            for i in 0..n {
                for a in 0..=m {
                    if a != best[i] {
                        let mut cand = best.clone();
                        cand[i] = a;
                        let f = score(&cand)?;
                        if f < gbest_f {
                            best = cand;
                            gbest_f = f;
                            continue 'outer;
                        }
                    }
                }
            }
            for i in 0..n {
                for k in i + 1..n {
                    for a in 0..=m {
                        for b in 0..=m {
                            if a == best[i] || b == best[k] {
                                continue;
                            }
                            let mut cand = best.clone();
                            cand[i] = a;
                            cand[k] = b;
                            let f = score(&cand)?;
                            if f < gbest_f {
                                best = cand;
                                gbest_f = f;
                                continue 'outer;
                            }
                        }
                    }
                }
            }
            break;
        }
    }
    Ok((OffloadDecision::new(best, m)?, gbest_f))
}

/// Brute-force optimum over all `(M + 1)^N` decisions.
pub fn exhaustive_optimum(
    scenario: &Scenario,
    channel: &ChannelState,
) -> Result<(OffloadDecision, f64)> {
    let n = scenario.n_ues();
    let k = scenario.n_placements();
    let total = (k as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("{k}^{n} decisions are too many to enumerate"))
        })?;
    let mut best = (OffloadDecision::all_local(n), f64::INFINITY);
    for code in 0..total {
        let mut c = code;
        let assign: Vec<usize> = (0..n)
            .map(|_| {
                let a = (c % k as u64) as usize;
                c /= k as u64;
                a
            })
            .collect();
        let d = OffloadDecision::new(assign, k - 1)?;
        let f = allocator::objective(&d, scenario, channel)?;
        if f < best.1 {
            best = (d, f);
        }
    }
    Ok(best)
}

/// Normalized reward rate `inferred / optimal`, clamped to `[0, 1.0001]`.
pub fn nrr(inferred_reward: f64, optimal_reward: f64) -> Result<f64> {
    if !(optimal_reward > 0.0) {
        return Err(Error::Infeasible(format!(
            "reference reward {optimal_reward} must be positive"
        )));
    }
    let r = inferred_reward / optimal_reward;
    if r > 1.0 {
        warn!("NRR {r:.6} exceeds 1: the reference solution is suboptimal here");
    }
    Ok(r.clamp(0.0, 1.0001))
}

/// Offline SAE stage: fit the normalizer, fill the memory and train.
pub fn pretrain_sae(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<Sae> {
    let channels: Vec<ChannelState> = (0..cfg.sae.pretrain_samples.max(1) as u64)
        .map(|k| sample_channel_state(scenario, k, &mut rng::substream(seed, Stream::Sae, k)))
        .collect();
    let normalizer = Normalizer::fit(&channels)?;
    let mut r = rng::substream(seed, Stream::Sae, u64::MAX);
    let mut sae = Sae::new(
        cfg.sae.clone(),
        scenario.n_ues(),
        scenario.n_mecs(),
        normalizer,
        seed,
        &mut r,
    )?;
    if !sae.is_identity() {
        for c in &channels {
            sae.observe(c)?;
        }
        sae.train(cfg.sae.t_sae, &mut r)?;
    }
    sae.sync();
    Ok(sae)
}

/// Held-out channels for scoring the SAE.
pub fn sae_test_channels(scenario: &Scenario, seed: u64, count: usize) -> Vec<ChannelState> {
    let mut r = rng::substream(seed, Stream::Sae, u64::MAX - 1);
    (0..count as u64)
        .map(|k| sample_channel_state(scenario, k, &mut r))
        .collect()
}

/// Builds the scenario, pretrains the SAE and returns an untrained agent.
pub fn build_agent(cfg: &ExperimentConfig, seed: u64) -> Result<Agent> {
    let scenario = cfg.scenario.build(seed)?;
    let sae = pretrain_sae(cfg, &scenario, seed)?;
    Agent::new(
        scenario,
        sae,
        cfg.drl.clone(),
        cfg.asa.clone(),
        cfg.replay.clone(),
        seed,
    )
}

/// Full training run for `cfg.seed`.
pub fn train(cfg: &ExperimentConfig) -> Result<(Agent, Vec<EpochLog>)> {
    let mut agent = build_agent(cfg, cfg.seed)?;
    let logs = agent.run(|_, out| {
        if out.log.epoch % 500 == 0 {
            info!(
                "epoch {} reward {:.5} t_sa {}",
                out.log.epoch, out.log.reward, out.log.t_sa
            );
        }
        Ok(())
    })?;
    Ok((agent, logs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ojrs,
    Asa,
    Greedy,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Ojrs,
        Strategy::Asa,
        Strategy::Greedy,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ojrs => "ojrs",
            Strategy::Asa => "asa",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
        }
    }
}

/// One row of `bench.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub replication: u64,
    pub strategy: Strategy,
    /// Median seconds per decision, including the inner allocation.
    pub decision_s: f64,
    /// Mean weighted latency over the evaluation channels.
    pub latency: f64,
    /// `1 / latency`.
    pub reward: f64,
    /// Mean per-channel NRR against the PSO reference.
    pub nrr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

impl BenchReport {
    /// Means across replications, in [`Strategy::ALL`] order.
    pub fn summary(&self) -> Vec<BenchRow> {
        Strategy::ALL
            .iter()
            .filter_map(|&s| {
                let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.strategy == s).collect();
                if rows.is_empty() {
                    return None;
                }
                let k = rows.len() as f64;
                let latency = rows.iter().map(|r| r.latency).sum::<f64>() / k;
                Some(BenchRow {
                    replication: 0,
                    strategy: s,
                    decision_s: rows.iter().map(|r| r.decision_s).sum::<f64>() / k,
                    latency,
                    reward: 1.0 / latency,
                    nrr: rows.iter().map(|r| r.nrr).sum::<f64>() / k,
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        Ok(Self {
            rows: r.deserialize().collect::<std::result::Result<_, _>>()?,
        })
    }

    /// Fixed-width table of [`BenchReport::summary`].
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>14} {:>14} {:>10} {:>8}\n",
            "strategy", "decision (s)", "latency (s)", "reward", "NRR"
        );
        for r in self.summary() {
            s += &format!(
                "{:<8} {:>14.6} {:>14.4} {:>10.4} {:>8.4}\n",
                r.strategy.name(),
                r.decision_s,
                r.latency,
                r.reward,
                r.nrr
            );
        }
        s
    }
}

/// Scores OJRS, ASA-only, Greedy and Random on held-out channels.
///
/// `trained` supplies a ready SAE and policy for single-replication runs;
/// otherwise each replication trains its own agent.
pub fn run_benchmark(
    cfg: &ExperimentConfig,
    trained: Option<(Sae, Network)>,
) -> Result<BenchReport> {
    cfg.validate()?;
    let mut report = BenchReport::default();
    if trained.is_some() && cfg.bench.replications.len() != 1 {
        return Err(Error::InvalidConfig(
            "a supplied policy needs exactly one replication".into(),
        ));
    }
    let mut trained = trained;
    for &seed in &cfg.bench.replications {
        let mut agent = build_agent(cfg, seed)?;
        match trained.take() {
            Some((sae, policy)) => {
                if policy.input_dim() != sae.code_dim()
                    || policy.output_dim() != agent.policy.output_dim()
                {
                    return Err(Error::Checkpoint(
                        "policy shape does not match the scenario".into(),
                    ));
                }
                agent.sae = sae;
                agent.policy = policy;
            }
            None => {
                info!("replication {seed}: training {} epochs", cfg.drl.t_drl);
                agent.run(|_, _| Ok(()))?;
            }
        }
        report.rows.extend(bench_replication(cfg, &agent, seed)?);
    }
    Ok(report)
}

fn bench_replication(cfg: &ExperimentConfig, agent: &Agent, seed: u64) -> Result<Vec<BenchRow>> {
    let scenario = agent.scenario();
    let first = cfg.drl.t_drl + 1;
    let channels: Vec<ChannelState> = (0..cfg.bench.eval_channels as u64)
        .map(|k| channel_at(scenario, first + k, seed))
        .collect();
    let mut oracle_rng = rng::stream(seed, Stream::Oracle);
    let oracle: Vec<f64> = channels
        .iter()
        .map(|c| pso_oracle(scenario, c, &cfg.bench.pso, &mut oracle_rng).map(|(_, f)| 1.0 / f))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for s in Strategy::ALL {
        let mut r = rng::substream(seed, Stream::Baseline, s as u64);
        let mut times = Vec::with_capacity(channels.len());
        let mut latency = 0.0;
        let mut nrr_sum = 0.0;
        for (c, &opt) in channels.iter().zip(&oracle) {
            let clock = Instant::now();
            let decision = match s {
                Strategy::Ojrs => agent.decide(c)?,
                Strategy::Asa => asa_only(scenario, c, &cfg.asa, cfg.bench.asa_budget, &mut r)?,
                Strategy::Greedy => greedy_baseline(scenario, c)?,
                Strategy::Random => random_baseline(scenario, c, &mut r)?,
            };
            let alloc = allocator::evaluate(&decision, scenario, c)?;
            times.push(clock.elapsed().as_secs_f64());
            latency += alloc.latency;
            nrr_sum += nrr(alloc.reward, opt)?;
        }
        let k = channels.len() as f64;
        let latency = latency / k;
        rows.push(BenchRow {
            replication: seed,
            strategy: s,
            decision_s: if cfg.bench.timing { median(times) } else { 0.0 },
            latency,
            reward: 1.0 / latency,
            nrr: nrr_sum / k,
        });
    }
    Ok(rows)
}

/// One row of `table3.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRow {
    pub n_mecs: usize,
    pub sae_accuracy: f64,
    pub compression_ratio: f64,
    pub f_best: f64,
    pub f_avg: f64,
    pub s_best: f64,
    pub s_avg: f64,
}

/// NRR probe taken during a dynamic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrrProbe {
    pub epoch: u64,
    pub nrr: f64,
    pub after_shift: bool,
}

/// Trains with a mid-run weight shift and probes NRR against PSO every
/// `nrr_interval` epochs.
pub fn dynamic_run(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(DynamicRow, Vec<NrrProbe>, Vec<EpochLog>)> {
    let mut cfg = cfg.clone();
    let shift = *cfg
        .drl
        .weight_shift_epoch
        .get_or_insert((cfg.drl.t_drl / 2).max(1));
    let mut agent = build_agent(&cfg, seed)?;
    let test = sae_test_channels(agent.scenario(), seed, cfg.bench.sae_test_channels.max(1));
    let sae_accuracy = agent.sae.accuracy(&test)?;
    let compression_ratio = agent.sae.compression_ratio();
    let mut oracle_rng = rng::stream(seed, Stream::Oracle);
    let mut probes = Vec::new();
    let interval = cfg.bench.nrr_interval;
    let pso = cfg.bench.pso.clone();
    let logs = agent.run(|agent, out| {
        if out.log.epoch % interval == 0 {
            let (_, f) = pso_oracle(agent.scenario(), &out.channel, &pso, &mut oracle_rng)?;
            probes.push(NrrProbe {
                epoch: out.log.epoch,
                nrr: nrr(out.log.reward, 1.0 / f)?,
                after_shift: out.log.epoch >= shift,
            });
        }
        Ok(())
    })?;
    let stats = |after: bool| {
        let xs: Vec<f64> = probes
            .iter()
            .filter(|p| p.after_shift == after)
            .map(|p| p.nrr)
            .collect();
        if xs.is_empty() {
            (0.0, 0.0)
        } else {
            (
                xs.iter().copied().fold(0.0, f64::max),
                xs.iter().sum::<f64>() / xs.len() as f64,
            )
        }
    };
    let (f_best, f_avg) = stats(false);
    let (s_best, s_avg) = stats(true);
    let row = DynamicRow {
        n_mecs: cfg.scenario.n_mecs,
        sae_accuracy,
        compression_ratio,
        f_best,
        f_avg,
        s_best,
        s_avg,
    };
    Ok((row, probes, logs))
}

/// Runs [`dynamic_run`] once per configured server count, in parallel.
pub fn run_dynamic(cfg: &ExperimentConfig) -> Result<Vec<DynamicRow>> {
    cfg.validate()?;
    let results: Vec<Result<DynamicRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .bench
            .mec_counts
            .iter()
            .map(|&m| {
                let mut c = cfg.clone();
                c.scenario.n_mecs = m;
                c.scenario.mec_positions = None;
                s.spawn(move || dynamic_run(&c, c.seed).map(|(row, _, _)| row))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("dynamic worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn write_table3(path: &Path, rows: &[DynamicRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table3(rows: &[DynamicRow]) -> String {
    let mut s = format!(
        "{:>5} {:>9} {:>6} {:>7} {:>7} {:>7} {:>7}\n",
        "MECs", "accuracy", "CR", "F-Best", "F-Avg", "S-Best", "S-Avg"
    );
    for r in rows {
        s += &format!(
            "{:>5} {:>9.4} {:>6.2} {:>7.4} {:>7.4} {:>7.4} {:>7.4}\n",
            r.n_mecs, r.sae_accuracy, r.compression_ratio, r.f_best, r.f_avg, r.s_best, r.s_avg
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::Fading;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, m: usize, seed: u64) -> (Scenario, ChannelState) {
        let sc = ScenarioConfig {
            n_ues: n,
            n_mecs: m,
            f_mec_max: 3e9,
            noise_w: 1e-8,
            ..Default::default()
        }
        .build(seed)
        .unwrap();
        let ch = channel_at(&sc, 0, seed);
        (sc, ch)
    }

    #[test]
    fn greedy_single_mec_with_ample_capacity() {
        let sc = ScenarioConfig {
            n_ues: 5,
            n_mecs: 1,
            ..Default::default()
        }
        .build(1)
        .unwrap();
        let ch = channel_at(&sc, 0, 1);
        assert_eq!(greedy_baseline(&sc, &ch).unwrap().as_slice(), &[1; 5]);
    }

    #[test]
    fn greedy_tie_goes_to_lower_index() {
        let cfg = ScenarioConfig {
            n_ues: 1,
            n_mecs: 2,
            ue_positions: Some(vec![[25.0, 25.0]]),
            fading: Fading::Deterministic,
            ..Default::default()
        };
        let sc = cfg.build(0).unwrap();
        let ch = channel_at(&sc, 0, 0);
        assert_eq!(greedy_baseline(&sc, &ch).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn greedy_falls_back_when_crowded() {
        // 5e9 shared by 10 UEs is slower than the 1e9 local clock.
        let sc = ScenarioConfig {
            n_ues: 10,
            n_mecs: 1,
            f_mec_max: 5e9,
            ..Default::default()
        }
        .build(2)
        .unwrap();
        let ch = channel_at(&sc, 0, 2);
        let d = greedy_baseline(&sc, &ch).unwrap();
        let offloaded = d.as_slice().iter().filter(|&&a| a == 1).count();
        assert!(offloaded > 0 && offloaded < 10);
        // Equal tasks: the lowest indices leave first.
        assert!(d.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_baseline_is_uniform_before_fallback() {
        let sc = ScenarioConfig {
            n_ues: 1,
            n_mecs: 2,
            ..Default::default()
        }
        .build(3)
        .unwrap();
        let ch = channel_at(&sc, 0, 3);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[random_baseline(&sc, &ch, &mut r).unwrap().placement(0)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn pso_matches_enumeration_on_toys() {
        let cfg = PsoConfig::default();
        let mut hits = 0;
        for seed in 0..100 {
            let n = 3 + (seed as usize % 6);
            let m = 1 + (seed as usize % 3);
            let (sc, ch) = toy(n, m, seed);
            let (_, f_opt) = exhaustive_optimum(&sc, &ch).unwrap();
            let (_, f) = pso_oracle(&sc, &ch, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(f >= f_opt * (1.0 - 1e-12));
            if f <= f_opt * (1.0 + 1e-9) {
                hits += 1;
            }
        }
        assert!(hits >= 95, "PSO matched {hits}/100");
    }

    #[test]
    fn pso_is_seeded() {
        let (sc, ch) = toy(6, 2, 5);
        let cfg = PsoConfig {
            iterations: 20,
            ..Default::default()
        };
        let a = pso_oracle(&sc, &ch, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = pso_oracle(&sc, &ch, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nrr_examples() {
        assert_eq!(nrr(0.05, 0.05).unwrap(), 1.0);
        assert_eq!(nrr(0.0, 0.05).unwrap(), 0.0);
        assert_eq!(nrr(1.0, 0.5).unwrap(), 1.0001);
        assert!(nrr(0.1, 0.0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![]), 0.0);
    }
}
