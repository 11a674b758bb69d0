//! Browser demo: draw a deployment, solve one channel snapshot with a chosen
//! strategy, and watch an annealing run converge.
//!
//! The `#[wasm_bindgen]` exports are thin JSON wrappers over plain functions
//! so the logic is testable natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use ojrs_core::allocator;
use ojrs_core::asa::{self, AsaConfig};
use ojrs_core::bench::{self, PsoConfig};
use ojrs_core::config::ScenarioConfig;
use ojrs_core::model::{channel_at, ChannelState, OffloadDecision, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub area_m: f64,
    pub ues: Vec<Point>,
    pub mecs: Vec<Point>,
    /// `gains[i][j]` in dB.
    pub gains_db: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub strategy: String,
    /// 0 is local, `j` is server `j - 1`.
    pub placement: Vec<usize>,
    pub freqs: Vec<f64>,
    pub powers: Vec<f64>,
    pub latency: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub best: Vec<f64>,
    pub placement: Vec<usize>,
    pub optimum: f64,
}

fn scenario(n_ues: usize, n_mecs: usize, seed: u64) -> Result<Scenario, String> {
    ScenarioConfig {
        n_ues,
        n_mecs,
        noise_w: 1e-7,
        ..Default::default()
    }
    .build(seed)
    .map_err(|e| e.to_string())
}

fn setup(
    n_ues: usize,
    n_mecs: usize,
    seed: u64,
    epoch: u64,
) -> Result<(Scenario, ChannelState), String> {
    let sc = scenario(n_ues, n_mecs, seed)?;
    let ch = channel_at(&sc, epoch, seed);
    Ok((sc, ch))
}

pub fn snapshot(n_ues: usize, n_mecs: usize, seed: u64, epoch: u64) -> Result<Snapshot, String> {
    let (sc, ch) = setup(n_ues, n_mecs, seed, epoch)?;
    Ok(Snapshot {
        area_m: sc.area_m,
        ues: sc
            .ues
            .iter()
            .map(|u| Point {
                x: u.position.x,
                y: u.position.y,
            })
            .collect(),
        mecs: sc
            .mecs
            .iter()
            .map(|m| Point {
                x: m.position.x,
                y: m.position.y,
            })
            .collect(),
        gains_db: (0..n_ues)
            .map(|i| ch.row(i).iter().map(|g| 10.0 * g.log10()).collect())
            .collect(),
    })
}

pub fn solve(
    n_ues: usize,
    n_mecs: usize,
    seed: u64,
    epoch: u64,
    strategy: &str,
) -> Result<Solution, String> {
    let (sc, ch) = setup(n_ues, n_mecs, seed, epoch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch);
    let err = |e: ojrs_core::Error| e.to_string();
    let decision: OffloadDecision = match strategy {
        "greedy" => bench::greedy_baseline(&sc, &ch).map_err(err)?,
        "random" => bench::random_baseline(&sc, &ch, &mut rng).map_err(err)?,
        "asa" => bench::asa_only(&sc, &ch, &AsaConfig::default(), 100, &mut rng).map_err(err)?,
        "pso" => {
            bench::pso_oracle(
                &sc,
                &ch,
                &PsoConfig {
                    iterations: 100,
                    ..Default::default()
                },
                &mut rng,
            )
            .map_err(err)?
            .0
        }
        "local" => OffloadDecision::all_local(n_ues),
        other => return Err(format!("unknown strategy {other:?}")),
    };
    let a = allocator::evaluate(&decision, &sc, &ch).map_err(err)?;
    Ok(Solution {
        strategy: strategy.to_string(),
        placement: decision.as_slice().to_vec(),
        freqs: a.freqs,
        powers: a.powers,
        latency: a.latency,
        reward: a.reward,
    })
}

/// Annealing from all-local with a fixed budget, plus a PSO reference value.
pub fn asa_trace(
    n_ues: usize,
    n_mecs: usize,
    seed: u64,
    epoch: u64,
    budget: usize,
) -> Result<Trace, String> {
    let (sc, ch) = setup(n_ues, n_mecs, seed, epoch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch);
    let err = |e: ojrs_core::Error| e.to_string();
    let out = asa::search(
        &OffloadDecision::all_local(n_ues),
        &ch,
        &sc,
        &AsaConfig::default(),
        budget,
        &mut rng,
    )
    .map_err(err)?;
    let (_, optimum) = bench::pso_oracle(
        &sc,
        &ch,
        &PsoConfig {
            iterations: 100,
            ..Default::default()
        },
        &mut rng,
    )
    .map_err(err)?;
    Ok(Trace {
        best: out.trace,
        placement: out.best.as_slice().to_vec(),
        optimum,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = snapshot)]
pub fn snapshot_js(n_ues: usize, n_mecs: usize, seed: u64, epoch: u64) -> Result<String, JsValue> {
    to_js(snapshot(n_ues, n_mecs, seed, epoch))
}

#[wasm_bindgen(js_name = solve)]
pub fn solve_js(
    n_ues: usize,
    n_mecs: usize,
    seed: u64,
    epoch: u64,
    strategy: &str,
) -> Result<String, JsValue> {
    to_js(solve(n_ues, n_mecs, seed, epoch, strategy))
}

#[wasm_bindgen(js_name = asaTrace)]
pub fn asa_trace_js(
    n_ues: usize,
    n_mecs: usize,
    seed: u64,
    epoch: u64,
    budget: usize,
) -> Result<String, JsValue> {
    to_js(asa_trace(n_ues, n_mecs, seed, epoch, budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_shapes() {
        let s = snapshot(8, 3, 1, 0).unwrap();
        assert_eq!(s.ues.len(), 8);
        assert_eq!(s.mecs.len(), 3);
        assert!(s
            .gains_db
            .iter()
            .all(|r| r.len() == 3 && r.iter().all(|g| g.is_finite())));
    }

    #[test]
    fn solve_every_strategy() {
        for s in ["greedy", "random", "asa", "pso", "local"] {
            let sol = solve(6, 2, 2, 5, s).unwrap();
            assert_eq!(sol.placement.len(), 6);
            assert!((sol.reward * sol.latency - 1.0).abs() < 1e-12);
        }
        assert!(solve(6, 2, 2, 5, "magic").is_err());
        assert!(solve(6, 9, 2, 5, "greedy").is_err());
    }

    #[test]
    fn pso_beats_local() {
        let local = solve(8, 2, 3, 0, "local").unwrap();
        let pso = solve(8, 2, 3, 0, "pso").unwrap();
        assert!(pso.latency <= local.latency);
    }

    #[test]
    fn trace_is_monotone() {
        let t = asa_trace(8, 2, 4, 1, 60).unwrap();
        assert_eq!(t.best.len(), 61);
        assert!(t.best.windows(2).all(|w| w[1] <= w[0]));
        assert!(t.optimum <= t.best[0]);
    }

    #[test]
    fn json_wrappers() {
        let text = to_js(solve(4, 1, 1, 0, "greedy")).unwrap();
        assert!(text.contains("\"strategy\":\"greedy\""));
    }
}
