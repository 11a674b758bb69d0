//! TOML experiment configuration.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::asa::AsaConfig;
use crate::bench::BenchConfig;
use crate::drl::DrlConfig;
use crate::error::{Error, Result};
use crate::model::{Fading, MecSpec, Position, RadioParams, Scenario, Task, UeSpec};
use crate::replay::ReplayConfig;
use crate::rng::{self, Stream};
use crate::sae::SaeConfig;

/// Server coordinates used for 1 to 5 servers in a 50 m square.
pub fn default_mec_layout(n_mecs: usize) -> Option<Vec<[f64; 2]>> {
    let layout: &[[f64; 2]] = match n_mecs {
        1 => &[[25.0, 25.0]],
        2 => &[[10.0, 10.0], [40.0, 40.0]],
        3 => &[[10.0, 10.0], [25.0, 25.0], [40.0, 40.0]],
        4 => &[[10.0, 10.0], [10.0, 40.0], [40.0, 10.0], [40.0, 40.0]],
        5 => &[
            [10.0, 10.0],
            [10.0, 40.0],
            [25.0, 25.0],
            [40.0, 10.0],
            [40.0, 40.0],
        ],
        _ => return None,
    };
    Some(layout.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub data_bits: f64,
    pub cycles: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            data_bits: 8e5,
            cycles: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_ues: usize,
    pub n_mecs: usize,
    pub area_m: f64,
    /// Server coordinates; the built-in layout is used when absent.
    pub mec_positions: Option<Vec<[f64; 2]>>,
    /// UE coordinates; drawn uniformly over the area when absent.
    pub ue_positions: Option<Vec<[f64; 2]>>,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub beta0: f64,
    pub min_distance: f64,
    pub fading: Fading,
    pub p_ue_max_w: f64,
    pub f_local_max: f64,
    pub f_mec_max: f64,
    pub kappa: f64,
    pub v_exp: f64,
    pub task: TaskConfig,
    /// Per-UE weights; all ones when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let radio = RadioParams::default();
        Self {
            n_ues: 30,
            n_mecs: 2,
            area_m: 50.0,
            mec_positions: None,
            ue_positions: None,
            bandwidth_hz: radio.bandwidth_hz,
            noise_w: radio.noise_w,
            beta0: radio.beta0,
            min_distance: radio.min_distance,
            fading: radio.fading,
            p_ue_max_w: 1.0,
            f_local_max: 1e9,
            f_mec_max: 5e10,
            kappa: 1e-27,
            v_exp: 3.0,
            task: TaskConfig::default(),
            weights: None,
        }
    }
}

fn positions(list: &[[f64; 2]]) -> Vec<Position> {
    list.iter().map(|&[x, y]| Position::new(x, y)).collect()
}

impl ScenarioConfig {
    /// Builds the scenario; random UE placement draws from the scenario stream of `seed`.
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        if self.n_ues == 0 || self.n_mecs == 0 {
            return Err(Error::InvalidConfig(
                "scenario needs at least one UE and one MEC".into(),
            ));
        }
        let mecs = match &self.mec_positions {
            Some(p) => p.clone(),
            None => default_mec_layout(self.n_mecs).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no built-in layout for {} servers; set mec_positions",
                    self.n_mecs
                ))
            })?,
        };
        if mecs.len() != self.n_mecs {
            return Err(Error::InvalidConfig(format!(
                "{} mec_positions for n_mecs = {}",
                mecs.len(),
                self.n_mecs
            )));
        }
        let ues = match &self.ue_positions {
            Some(p) => p.clone(),
            None => {
                let mut r = rng::stream(seed, Stream::Scenario);
                (0..self.n_ues)
                    .map(|_| {
                        [
                            r.random_range(0.0..=self.area_m),
                            r.random_range(0.0..=self.area_m),
                        ]
                    })
                    .collect()
            }
        };
        if ues.len() != self.n_ues {
            return Err(Error::InvalidConfig(format!(
                "{} ue_positions for n_ues = {}",
                ues.len(),
                self.n_ues
            )));
        }
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.n_ues]);
        if weights.len() != self.n_ues {
            return Err(Error::InvalidConfig(format!(
                "{} weights for n_ues = {}",
                weights.len(),
                self.n_ues
            )));
        }
        let scenario = Scenario {
            ues: positions(&ues)
                .into_iter()
                .zip(weights)
                .map(|(position, weight)| UeSpec {
                    position,
                    task: Task {
                        cycles: self.task.cycles,
                        data_bits: self.task.data_bits,
                        weight,
                    },
                    f_local_max: self.f_local_max,
                    p_ue_max: self.p_ue_max_w,
                    kappa: self.kappa,
                    v_exp: self.v_exp,
                })
                .collect(),
            mecs: positions(&mecs)
                .into_iter()
                .map(|position| MecSpec {
                    position,
                    f_mec_max: self.f_mec_max,
                })
                .collect(),
            radio: RadioParams {
                bandwidth_hz: self.bandwidth_hz,
                noise_w: self.noise_w,
                beta0: self.beta0,
                min_distance: self.min_distance,
                fading: self.fading,
            },
            area_m: self.area_m,
            rng_seed: seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Same config with the drawn placement and weights written out explicitly.
    pub fn pinned(&self, scenario: &Scenario) -> Self {
        let xy = |p: &Position| [p.x, p.y];
        Self {
            ue_positions: Some(scenario.ues.iter().map(|u| xy(&u.position)).collect()),
            mec_positions: Some(scenario.mecs.iter().map(|m| xy(&m.position)).collect()),
            weights: Some(scenario.ues.iter().map(|u| u.task.weight).collect()),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub sae: SaeConfig,
    pub drl: DrlConfig,
    pub asa: AsaConfig,
    pub replay: ReplayConfig,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: ScenarioConfig::default(),
            sae: SaeConfig::default(),
            drl: DrlConfig::default(),
            asa: AsaConfig::default(),
            replay: ReplayConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.build(self.seed)?;
        self.sae
            .validate(self.scenario.n_ues * self.scenario.n_mecs)?;
        self.drl.validate()?;
        self.asa.validate()?;
        self.replay.validate()?;
        self.bench.validate()?;
        Ok(())
    }
}
