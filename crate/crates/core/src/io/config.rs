//! Experiment configuration: strict JSON schema, unit conversion and
//! validation with field paths.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::choice::{ChoiceMode, ChoiceNoise, Menu};
use crate::learning::{candidate_queries, MhSettings, Query, QueryStrategy};
use crate::planner::PlanningProblem;
use crate::population::PopulationModel;
use crate::road::{Network, Road};
use crate::simulator::{ElicitationConfig, Scenario};

use super::units;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config at `{path}`: {reason}")]
    Validation { path: String, reason: String },
}

fn invalid<T>(path: impl Into<String>, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation {
        path: path.into(),
        reason: reason.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    #[serde(deserialize_with = "units::length")]
    pub length: f64,
    #[serde(deserialize_with = "units::speed")]
    pub free_speed: f64,
    #[serde(deserialize_with = "units::length")]
    pub vehicle_length: f64,
    #[serde(deserialize_with = "units::time")]
    pub tau_h: f64,
    #[serde(deserialize_with = "units::time")]
    pub tau_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    #[serde(deserialize_with = "units::flow")]
    pub human: f64,
    #[serde(deserialize_with = "units::flow")]
    pub autonomous: f64,
}

fn default_grid() -> usize {
    9
}

fn deterministic() -> ChoiceMode {
    ChoiceMode::Deterministic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub profit_floor: f64,
    pub price_cap: f64,
    #[serde(deserialize_with = "units::time")]
    pub latency_cap: f64,
    /// Defaults to twice the latency cap.
    #[serde(default, deserialize_with = "units::optional_time")]
    pub penalty_latency: Option<f64>,
    #[serde(default = "default_grid")]
    pub latency_grid: usize,
    #[serde(default = "default_grid")]
    pub price_grid: usize,
    /// How the planner aggregates rider choices; the temperature comes from
    /// `choice.beta`.
    #[serde(default = "deterministic")]
    pub aggregation: ChoiceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub truth: PopulationModel,
    /// Riders in the simulated population.
    pub users: usize,
}

fn uniform_prior() -> PopulationModel {
    PopulationModel::uniform()
}

fn active() -> QueryStrategy {
    QueryStrategy::Active
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    /// Riders questioned; the first `users` of the simulated population.
    pub users: usize,
    pub query_budget: usize,
    #[serde(default = "active")]
    pub strategy: QueryStrategy,
    #[serde(deserialize_with = "units::times")]
    pub query_latencies: Vec<f64>,
    pub query_prices: Vec<f64>,
    #[serde(default = "uniform_prior")]
    pub prior: PopulationModel,
    #[serde(default)]
    pub mh: MhSettings,
    /// `(latency, price)` pairs used to score learned models.
    pub reference_menu: Vec<(f64, f64)>,
}

fn default_output() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub roads: Vec<RoadConfig>,
    pub demand: DemandConfig,
    pub planner: PlannerConfig,
    pub population: PopulationConfig,
    /// Rider answer and choice behaviour.
    pub choice: ChoiceNoise,
    pub learning: LearningConfig,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: String,
}

/// A parsed configuration together with the bytes it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    /// SHA-256 of `source`, hex encoded.
    pub hash: String,
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses and validates configuration bytes.
pub fn parse_config(bytes: &[u8]) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = serde_json::from_slice(bytes).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config_str(source: &str) -> Result<LoadedConfig, ConfigError> {
    let config = parse_config(source.as_bytes())?;
    Ok(LoadedConfig {
        config,
        hash: config_hash(source.as_bytes()),
        source: source.to_string(),
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig, ConfigError> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config_str(&source)
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn network(&self) -> Result<Network, ConfigError> {
        let roads = self
            .roads
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Road::new(r.length, r.free_speed, r.vehicle_length, r.tau_h, r.tau_a).map_err(|e| {
                    let field = match &e {
                        crate::road::RoadError::InvalidRoad { field, .. } => *field,
                        _ => "",
                    };
                    ConfigError::Validation {
                        path: format!("roads[{i}].{field}"),
                        reason: e.to_string(),
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Network::new(roads).map_err(|e| ConfigError::Validation {
            path: "roads".into(),
            reason: e.to_string(),
        })
    }

    pub fn penalty_latency(&self) -> f64 {
        self.planner.penalty_latency.unwrap_or(2.0 * self.planner.latency_cap)
    }

    pub fn candidates(&self) -> Vec<Query> {
        candidate_queries(&self.learning.query_latencies, &self.learning.query_prices)
    }

    pub fn reference_menu(&self) -> Result<Menu, ConfigError> {
        Menu::from_pairs(&self.learning.reference_menu).map_err(|e| ConfigError::Validation {
            path: "learning.reference_menu".into(),
            reason: e.to_string(),
        })
    }

    /// Planner noise: deterministic, or the rider temperature when noisy.
    pub fn planner_noise(&self) -> ChoiceNoise {
        ChoiceNoise {
            beta: self.choice.beta,
            mode: self.planner.aggregation,
        }
    }

    /// Rider answers are always noisy-rational at temperature `choice.beta`.
    pub fn answer_noise(&self) -> ChoiceNoise {
        ChoiceNoise {
            beta: self.choice.beta,
            mode: ChoiceMode::Noisy,
        }
    }

    pub fn problem(&self, population: PopulationModel) -> Result<PlanningProblem, ConfigError> {
        let problem = PlanningProblem {
            network: self.network()?,
            demand_h: self.demand.human,
            demand_a: self.demand.autonomous,
            profit_floor: self.planner.profit_floor,
            price_cap: self.planner.price_cap,
            latency_cap: self.planner.latency_cap,
            penalty_latency: self.penalty_latency(),
            latency_grid: self.planner.latency_grid,
            price_grid: self.planner.price_grid,
            population,
            noise: self.planner_noise(),
        };
        problem.validate().map_err(|e| {
            let field = match &e {
                crate::planner::PlannerError::InvalidProblem { field, .. } => *field,
                _ => "",
            };
            let path = match field {
                "demand_h" => "demand.human".to_string(),
                "demand_a" => "demand.autonomous".to_string(),
                "population" => "population.truth".to_string(),
                "" => "planner".to_string(),
                f => format!("planner.{f}"),
            };
            ConfigError::Validation {
                path,
                reason: e.to_string(),
            }
        })?;
        Ok(problem)
    }

    pub fn elicitation(&self) -> ElicitationConfig {
        ElicitationConfig {
            query_budget: self.learning.query_budget,
            noise: self.answer_noise(),
            candidates: self.candidates(),
            prior: self.learning.prior.clone(),
            mh: self.learning.mh,
            strategy: self.learning.strategy,
        }
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario, ConfigError> {
        Ok(Scenario {
            problem: self.problem(self.population.truth.clone())?,
            truth: self.population.truth.clone(),
            population_size: self.population.users,
            learning_users: self.learning.users,
            elicitation: self.elicitation(),
            simulation_noise: self.choice,
            reference_menu: self.reference_menu()?,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.roads.is_empty() {
            return invalid("roads", "at least one road is required");
        }
        self.network()?;
        for (path, x) in [("demand.human", self.demand.human), ("demand.autonomous", self.demand.autonomous)] {
            if !(x.is_finite() && x >= 0.0) {
                return invalid(path, format!("must be finite and >= 0, got {x}"));
            }
        }
        if self.demand.human + self.demand.autonomous <= 0.0 {
            return invalid("demand", "total demand must be positive");
        }
        self.population.truth.validate().or_else(|e| invalid("population.truth", e.to_string()))?;
        if self.population.users == 0 {
            return invalid("population.users", "must be at least 1");
        }
        self.choice.validate().or_else(|e| invalid("choice.beta", e.to_string()))?;
        self.problem(self.population.truth.clone())?;

        let l = &self.learning;
        if l.users == 0 {
            return invalid("learning.users", "must be at least 1");
        }
        if l.users > self.population.users {
            return invalid(
                "learning.users",
                format!("{} exceeds population.users = {}", l.users, self.population.users),
            );
        }
        if l.query_budget == 0 {
            return invalid("learning.query_budget", "must be at least 1");
        }
        for (i, &x) in l.query_latencies.iter().enumerate() {
            if !(x.is_finite() && x > 0.0) {
                return invalid(format!("learning.query_latencies[{i}]"), format!("must be > 0, got {x}"));
            }
        }
        for (i, &x) in l.query_prices.iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) {
                return invalid(format!("learning.query_prices[{i}]"), format!("must be >= 0, got {x}"));
            }
        }
        if self.candidates().is_empty() {
            return invalid(
                "learning.query_latencies",
                "candidate grid is empty; need at least two distinct latencies and two distinct prices",
            );
        }
        if l.prior.ln_pdf(0.5).is_none() {
            return invalid("learning.prior", "prior must be a beta distribution");
        }
        l.prior.validate().or_else(|e| invalid("learning.prior", e.to_string()))?;
        l.mh.validate().or_else(|e| invalid("learning.mh", e.to_string()))?;
        if l.reference_menu.is_empty() {
            return invalid("learning.reference_menu", "needs at least one option");
        }
        self.reference_menu()?;
        Ok(())
    }
}
