//! Exact inner allocation for a fixed offloading decision.
//!
//! Once the placement is fixed, latency is strictly decreasing in transmit
//! power and in every CPU share, so each UE transmits at its power ceiling and
//! local UEs run at the fastest power-feasible clock. What remains per server
//! is `min sum_i c_i / f_i  s.t. sum_i f_i = F`, with `c_i = w_i F_i`, whose
//! stationarity condition `c_i / f_i^2 = mu` gives shares proportional to
//! `sqrt(c_i)`.

use crate::error::{Error, Result};
use crate::model::{weighted_latency, ChannelState, OffloadDecision, Scenario, UeSpec};

/// Powers, frequencies and resulting objective for one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// CPU share (remote) or local clock per UE, cycles/s.
    pub freqs: Vec<f64>,
    /// Transmit power (offloaded) or execution power (local), watts.
    pub powers: Vec<f64>,
    /// Weighted latency, seconds.
    pub latency: f64,
    /// `1 / latency`.
    pub reward: f64,
}

/// Fastest local clock satisfying both the CPU ceiling and the power budget.
pub fn local_capacity(ue: &UeSpec) -> Result<f64> {
    let power_bound = if ue.kappa > 0.0 {
        (ue.p_ue_max / ue.kappa).powf(1.0 / ue.v_exp)
    } else {
        f64::INFINITY
    };
    let f = ue.f_local_max.min(power_bound);
    if f > 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(Error::Infeasible(format!(
            "local capacity {f} is not positive"
        )))
    }
}

/// Offloaded UEs transmit at `p_max`; local UEs draw `kappa f^v` at their local capacity.
pub fn max_power_assignment(decision: &OffloadDecision, scenario: &Scenario) -> Result<Vec<f64>> {
    scenario
        .ues
        .iter()
        .enumerate()
        .map(|(i, ue)| match decision.server(i) {
            Some(_) => Ok(ue.p_ue_max),
            None => Ok(ue.kappa * local_capacity(ue)?.powf(ue.v_exp)),
        })
        .collect()
}

fn check_len(decision: &OffloadDecision, scenario: &Scenario) -> Result<()> {
    if decision.len() != scenario.n_ues() {
        return Err(Error::DimensionMismatch {
            expected: scenario.n_ues(),
            actual: decision.len(),
        });
    }
    if let Some(&a) = decision.as_slice().iter().find(|&&a| a > scenario.n_mecs()) {
        return Err(Error::Infeasible(format!(
            "placement {a} exceeds server count"
        )));
    }
    Ok(())
}

/// Closed-form optimal CPU shares.
///
/// Server `j` splits its capacity across its tasks in proportion to
/// `sqrt(w_i F_i)`; local UEs get [`local_capacity`].
pub fn allocate_frequencies(decision: &OffloadDecision, scenario: &Scenario) -> Result<Vec<f64>> {
    check_len(decision, scenario)?;
    let mut root_sums = vec![0.0; scenario.n_mecs()];
    for (i, ue) in scenario.ues.iter().enumerate() {
        if let Some(j) = decision.server(i) {
            root_sums[j] += (ue.task.weight * ue.task.cycles).sqrt();
        }
    }
    scenario
        .ues
        .iter()
        .enumerate()
        .map(|(i, ue)| match decision.server(i) {
            None => local_capacity(ue),
            Some(j) => {
                let denom = root_sums[j];
                if !(denom > 0.0) {
                    return Err(Error::Infeasible(format!(
                        "server {j} has a zero share denominator"
                    )));
                }
                Ok(scenario.mecs[j].f_mec_max * (ue.task.weight * ue.task.cycles).sqrt() / denom)
            }
        })
        .collect()
}

/// Numeric reference solver for the per-server share problem.
///
/// Works only from the primal objective: for a trial multiplier `mu`, each
/// share minimises `c_i / f + mu f` by golden-section search in `ln f`, and
/// `mu` is bisected (in log space) until the shares use exactly the server
/// capacity. Used to cross-check [`allocate_frequencies`].
pub fn allocate_frequencies_oracle(
    decision: &OffloadDecision,
    scenario: &Scenario,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    check_len(decision, scenario)?;
    let mut freqs = vec![0.0; scenario.n_ues()];
    for (i, ue) in scenario.ues.iter().enumerate() {
        if decision.server(i).is_none() {
            freqs[i] = local_capacity(ue)?;
        }
    }
    for (j, mec) in scenario.mecs.iter().enumerate() {
        let members: Vec<usize> = (0..scenario.n_ues())
            .filter(|&i| decision.server(i) == Some(j))
            .collect();
        if members.is_empty() {
            continue;
        }
        let costs: Vec<f64> = members
            .iter()
            .map(|&i| scenario.ues[i].task.weight * scenario.ues[i].task.cycles)
            .collect();
        let capacity = mec.f_mec_max;
        let shares = solve_share_program(&costs, capacity, tol, max_iter)?;
        for (&i, f) in members.iter().zip(shares) {
            freqs[i] = f;
        }
    }
    Ok(freqs)
}

fn solve_share_program(
    costs: &[f64],
    capacity: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    // Work in units of the capacity so the search brackets are scale-free.
    let scale = costs.iter().cloned().fold(0.0f64, f64::max);
    let unit_costs: Vec<f64> = costs.iter().map(|c| c / scale).collect();
    let shares_for = |log_mu: f64| -> Vec<f64> {
        let mu = log_mu.exp();
        unit_costs
            .iter()
            .map(|&c| golden_min_log(|f| c / f + mu * f, -60.0, 60.0, tol))
            .collect()
    };
    let (mut lo, mut hi) = (-200.0f64, 200.0f64);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let used: f64 = shares_for(mid).iter().sum();
        // Larger multipliers shrink every share.
        if used > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol * 1e-3 {
            let shares = shares_for(0.5 * (lo + hi));
            let used: f64 = shares.iter().sum();
            return Ok(shares.iter().map(|f| capacity * f / used).collect());
        }
    }
    Err(Error::NonConvergence(max_iter))
}

/// Minimiser of a unimodal `g(f)` over `f = e^u`, `u` in `[lo, hi]`.
fn golden_min_log(g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c.exp()), g(d.exp()));
    while b - a > tol * 1e-2 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c.exp());
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d.exp());
        }
    }
    (0.5 * (a + b)).exp()
}

/// Full inner solve: powers, shares, weighted latency and reward.
pub fn evaluate(
    decision: &OffloadDecision,
    scenario: &Scenario,
    channel: &ChannelState,
) -> Result<Allocation> {
    let powers = max_power_assignment(decision, scenario)?;
    let freqs = allocate_frequencies(decision, scenario)?;
    let latency = weighted_latency(scenario, decision, &freqs, &powers, channel)?;
    if !(latency > 0.0 && latency.is_finite()) {
        return Err(Error::Infeasible(format!(
            "latency {latency} is not positive and finite"
        )));
    }
    Ok(Allocation {
        freqs,
        powers,
        latency,
        reward: 1.0 / latency,
    })
}

/// Weighted latency of `decision` under the optimal inner allocation.
pub fn objective(
    decision: &OffloadDecision,
    scenario: &Scenario,
    channel: &ChannelState,
) -> Result<f64> {
    evaluate(decision, scenario, channel).map(|a| a.latency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{channel_at, MecSpec, Position, RadioParams, Task};
    use approx::assert_relative_eq;

    fn ue(cycles: f64, weight: f64) -> UeSpec {
        UeSpec {
            position: Position::new(5.0, 5.0),
            task: Task {
                cycles,
                data_bits: 8e5,
                weight,
            },
            f_local_max: 1e9,
            p_ue_max: 1.0,
            kappa: 1e-27,
            v_exp: 3.0,
        }
    }

    fn one_mec(ues: Vec<UeSpec>, cap: f64) -> Scenario {
        Scenario {
            ues,
            mecs: vec![MecSpec {
                position: Position::new(10.0, 10.0),
                f_mec_max: cap,
            }],
            radio: RadioParams::default(),
            area_m: 50.0,
            rng_seed: 0,
        }
    }

    #[test]
    fn local_capacity_examples() {
        assert_relative_eq!(
            local_capacity(&ue(1e9, 1.0)).unwrap(),
            1e9,
            max_relative = 1e-12
        );

        let mut u = ue(1e9, 1.0);
        u.p_ue_max = 1e-3;
        u.f_local_max = 1e10;
        let f = local_capacity(&u).unwrap();
        assert_relative_eq!(f, 1e8, max_relative = 1e-12);
        assert_relative_eq!(1e-27 * f.powi(3), 1e-3, max_relative = 1e-12);

        let mut u = ue(1e9, 1.0);
        u.f_local_max = 0.5e9;
        assert_relative_eq!(local_capacity(&u).unwrap(), 0.5e9);

        let mut u = ue(1e9, 1.0);
        u.f_local_max = 0.0;
        assert!(local_capacity(&u).is_err());
    }

    #[test]
    fn power_assignment_examples() {
        let s = one_mec(vec![ue(1e9, 1.0), ue(1e9, 1.0)], 5e10);
        let d = OffloadDecision::new(vec![1, 0], 1).unwrap();
        let p = max_power_assignment(&d, &s).unwrap();
        assert_eq!(p[0], 1.0);
        assert_relative_eq!(p[1], 1.0, max_relative = 1e-12);
        for (pi, u) in p.iter().zip(&s.ues) {
            assert!(*pi <= u.p_ue_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn frequency_examples() {
        let s = one_mec(vec![ue(1e9, 1.0), ue(1e9, 1.0)], 5e10);
        let d = OffloadDecision::new(vec![1, 1], 1).unwrap();
        let f = allocate_frequencies(&d, &s).unwrap();
        assert_relative_eq!(f[0], 2.5e10, max_relative = 1e-12);
        assert_relative_eq!(f[1], 2.5e10, max_relative = 1e-12);

        // w1 F1 = 1e18, w2 F2 = 4e18 -> shares 1:2.
        let s = one_mec(vec![ue(1e9, 1e9), ue(4e9, 1e9)], 3e9);
        let f = allocate_frequencies(&d, &s).unwrap();
        let oracle = allocate_frequencies_oracle(&d, &s, 1e-10, 500).unwrap();
        assert_relative_eq!(oracle[0], 1e9, max_relative = 1e-7);
        assert_relative_eq!(oracle[1], 2e9, max_relative = 1e-7);
        assert_relative_eq!(f[0], 1e9, max_relative = 1e-12);
        assert_relative_eq!(f[1], 2e9, max_relative = 1e-12);

        let s = one_mec(vec![ue(1e9, 1.0)], 5e10);
        let d = OffloadDecision::new(vec![1], 1).unwrap();
        assert_relative_eq!(allocate_frequencies(&d, &s).unwrap()[0], 5e10);
    }

    #[test]
    fn oracle_symmetric_split() {
        let s = one_mec(vec![ue(2e9, 1.0), ue(2e9, 1.0)], 4e9);
        let d = OffloadDecision::new(vec![1, 1], 1).unwrap();
        let f = allocate_frequencies_oracle(&d, &s, 1e-9, 500).unwrap();
        assert_relative_eq!(f[0], 2e9, max_relative = 1e-8);
        assert_relative_eq!(f[1], 2e9, max_relative = 1e-8);
    }

    #[test]
    fn oracle_reports_nonconvergence() {
        let s = one_mec(vec![ue(2e9, 1.0), ue(3e9, 1.0)], 4e9);
        let d = OffloadDecision::new(vec![1, 1], 1).unwrap();
        assert!(matches!(
            allocate_frequencies_oracle(&d, &s, 1e-9, 3),
            Err(Error::NonConvergence(3))
        ));
    }

    #[test]
    fn evaluate_reward_is_reciprocal() {
        let s = one_mec(vec![ue(1e9, 1.0), ue(2e9, 1.5), ue(1e9, 0.5)], 5e10);
        let c = channel_at(&s, 0, 3);
        let d = OffloadDecision::new(vec![1, 0, 1], 1).unwrap();
        let a = evaluate(&d, &s, &c).unwrap();
        assert_relative_eq!(a.reward * a.latency, 1.0, max_relative = 1e-15);
        // C5 is tight on the serving server.
        assert_relative_eq!(a.freqs[0] + a.freqs[2], 5e10, max_relative = 1e-12);
    }

    #[test]
    fn all_local_latency() {
        let s = one_mec(vec![ue(1e9, 1.0); 4], 5e10);
        let c = channel_at(&s, 0, 3);
        let a = evaluate(&OffloadDecision::all_local(4), &s, &c).unwrap();
        assert_relative_eq!(a.latency, 4.0 * 1e9 / 1e9, max_relative = 1e-12);
    }

    #[test]
    fn table_reward_column_is_reciprocal_of_latency() {
        assert!((1.0f64 / 20.6874 - 0.0483).abs() < 1e-4);
        assert!((1.0f64 / 36.4325 - 0.0275).abs() < 1e-4);
    }
}
