//! Closed-loop experiments against a simulated rider population.
//!
//! The truth distribution generates riders, the elicitation phase questions
//! a subset of them, the planner optimizes against the fitted model, and the
//! posted menu is then played out rider by rider to measure what actually
//! happens. Two reference planners run on the same riders: a zero-price
//! menu at free-flow latencies, and the planner given the true distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{sample_choice_with, ChoiceDistribution, ChoiceNoise, Menu, WeightVector};
use crate::learning::{
    fit_population, learning_error, ElicitationSession, LearningError, MhSettings, Observation,
    PosteriorSamples, Query, QueryStrategy,
};
use crate::planner::{evaluate_menu, evaluate_with_q, optimize_logged, Plan, PlanEvaluation, PlanningProblem, PlannerError, SearchLogEntry};
use crate::population::{PopulationError, PopulationModel};
use crate::road::FlowAssignment;
use crate::seeds::{self, Phase};

/// Posterior draws per rider kept for intermediate learning-curve points.
pub const CURVE_SAMPLES: usize = 250;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("population needs at least one user")]
    NoUsers,
    #[error("learning uses {wanted} users but the population has {available}")]
    NotEnoughUsers { wanted: usize, available: usize },
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Simulated riders, each with a fixed `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub thetas: Vec<f64>,
}

impl Population {
    pub fn user_count(&self) -> usize {
        self.thetas.len()
    }
}

pub fn sample_population(truth: &PopulationModel, n_users: usize, seed: u64) -> Result<Population, SimulationError> {
    if n_users == 0 {
        return Err(SimulationError::NoUsers);
    }
    truth.validate()?;
    let mut rng = seeds::stream_rng(seed, 0);
    let thetas = (0..n_users).map(|_| truth.sample(&mut rng)).collect();
    Ok(Population { thetas })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationConfig {
    pub query_budget: usize,
    /// Answer model of the simulated riders, also assumed by inference.
    pub noise: ChoiceNoise,
    pub candidates: Vec<Query>,
    pub prior: PopulationModel,
    pub mh: MhSettings,
    pub strategy: QueryStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationOutcome {
    pub model: PopulationModel,
    pub observations: Vec<Observation>,
    pub posteriors: Vec<PosteriorSamples>,
    /// Population fit after `t` answers per rider, for `t = 0..=budget`.
    pub curve: Vec<PopulationModel>,
}

struct UserRun {
    observations: Vec<Observation>,
    history: Vec<PosteriorSamples>,
    last: PosteriorSamples,
}

/// Questions every rider of `population`, infers each rider's posterior and
/// fits the population model. Riders are independent and run in parallel;
/// results are folded in rider order.
pub fn elicitation_phase(
    population: &Population,
    config: &ElicitationConfig,
    seed: u64,
) -> Result<ElicitationOutcome, SimulationError> {
    if config.query_budget == 0 {
        return Err(LearningError::ZeroBudget.into());
    }
    if population.thetas.is_empty() {
        return Err(SimulationError::NoUsers);
    }
    let inference_seed = seeds::phase_seed(seed, Phase::Inference);
    let answer_seed = seeds::phase_seed(seed, Phase::Elicitation);

    let runs: Vec<UserRun> = population
        .thetas
        .par_iter()
        .enumerate()
        .map(|(u, &theta)| -> Result<UserRun, SimulationError> {
            let user = u as u64;
            let w = WeightVector::new(theta).map_err(LearningError::from)?;
            let mut answers = seeds::stream_rng(answer_seed, user);
            let mut session = ElicitationSession::new(
                user,
                config.prior.clone(),
                config.noise,
                config.mh,
                &config.candidates,
                config.strategy,
                inference_seed,
            )?;
            let mut history = Vec::with_capacity(config.query_budget);
            for _ in 0..config.query_budget {
                history.push(session.posterior().thinned(CURVE_SAMPLES));
                let query = session.next_query()?;
                let menu = Menu::new(vec![query.a, query.b]).map_err(LearningError::from)?;
                let answer = sample_choice_with(w, &menu, &config.noise, &mut answers);
                session.record(query, answer)?;
            }
            let (observations, last) = session.into_parts();
            Ok(UserRun { observations, history, last })
        })
        .collect::<Result<_, _>>()?;

    let mut curve = Vec::with_capacity(config.query_budget + 1);
    for t in 0..config.query_budget {
        let at_t: Vec<PosteriorSamples> = runs.iter().map(|r| r.history[t].clone()).collect();
        curve.push(fit_population(&at_t)?);
    }
    let posteriors: Vec<PosteriorSamples> = runs.iter().map(|r| r.last.clone()).collect();
    let model = fit_population(&posteriors)?;
    curve.push(model.clone());
    let observations = runs.into_iter().flat_map(|r| r.observations).collect();
    Ok(ElicitationOutcome {
        model,
        observations,
        posteriors,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub queries: usize,
    pub learning_error: f64,
}

pub fn learning_curve(outcome: &ElicitationOutcome, truth: &PopulationModel, reference_menu: &Menu) -> Vec<CurvePoint> {
    outcome
        .curve
        .iter()
        .enumerate()
        .map(|(queries, model)| CurvePoint {
            queries,
            learning_error: learning_error(model, truth, reference_menu),
        })
        .collect()
}

/// Every rider picks from `menu`; returns the empirical shares and the
/// individual picks.
pub fn simulate_choices(
    population: &Population,
    menu: &Menu,
    noise: &ChoiceNoise,
    seed: u64,
) -> Result<(ChoiceDistribution, Vec<usize>), SimulationError> {
    if population.thetas.is_empty() {
        return Err(SimulationError::NoUsers);
    }
    let choices: Vec<usize> = population
        .thetas
        .par_iter()
        .enumerate()
        .map(|(u, &theta)| {
            let w = WeightVector::new(theta).map_err(|e| SimulationError::Learning(e.into()))?;
            let mut rng = seeds::stream_rng(seed, u as u64);
            Ok(sample_choice_with(w, menu, noise, &mut rng))
        })
        .collect::<Result<_, SimulationError>>()?;
    let mut counts = vec![0usize; menu.len()];
    for &c in &choices {
        counts[c] += 1;
    }
    let n = choices.len() as f64;
    let q = ChoiceDistribution(counts.into_iter().map(|c| c as f64 / n).collect());
    Ok((q, choices))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeGaps {
    /// Realized minus planned.
    pub j: f64,
    pub profit: f64,
    pub unserved_h: f64,
    /// Largest share difference between realized and planned `q`.
    pub q_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub realized_q: ChoiceDistribution,
    pub flows: FlowAssignment,
    pub j: f64,
    pub profit: f64,
    pub unserved_h: f64,
    pub feasible: bool,
    pub autonomous_fits: bool,
    pub profit_ok: bool,
    pub gaps: OutcomeGaps,
    pub seeds: PhaseSeeds,
}

/// Seeds used by each phase, all derived from the base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSeeds {
    pub base: u64,
    pub population: u64,
    pub elicitation: u64,
    pub simulation: u64,
}

impl PhaseSeeds {
    pub fn from_base(base: u64) -> Self {
        Self {
            base,
            population: seeds::phase_seed(base, Phase::Population),
            elicitation: base,
            simulation: seeds::phase_seed(base, Phase::Simulation),
        }
    }
}

/// Replays `plan`'s posted menu with realized rider shares.
pub fn evaluate_realized(
    problem: &PlanningProblem,
    plan: &Plan,
    planned: &PlanEvaluation,
    empirical_q: ChoiceDistribution,
    seeds: PhaseSeeds,
) -> Result<SimulationResult, SimulationError> {
    let (realized, eval) = evaluate_with_q(problem, plan.ell.as_slice(), &plan.prices, empirical_q)?;
    let gaps = OutcomeGaps {
        j: eval.j - planned.j,
        profit: eval.profit - planned.profit,
        unserved_h: eval.unserved_h - planned.unserved_h,
        q_linf: realized.q.linf_distance(&plan.q),
    };
    Ok(SimulationResult {
        realized_q: realized.q,
        flows: realized.flows,
        j: eval.j,
        profit: eval.profit,
        unserved_h: eval.unserved_h,
        feasible: eval.feasible,
        autonomous_fits: eval.autonomous_fits,
        profit_ok: eval.profit_ok,
        gaps,
        seeds,
    })
}

/// Everything `run_experiment` needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Planning problem; its population is replaced by each planner's model.
    pub problem: PlanningProblem,
    pub truth: PopulationModel,
    /// Riders in the simulated population.
    pub population_size: usize,
    /// The first `learning_users` riders are questioned.
    pub learning_users: usize,
    pub elicitation: ElicitationConfig,
    /// Choice behaviour during the realized-outcome phase.
    pub simulation_noise: ChoiceNoise,
    pub reference_menu: Menu,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerRow {
    pub name: String,
    pub ell: Vec<f64>,
    pub prices: Vec<f64>,
    pub planned_j: f64,
    pub planned_feasible: bool,
    pub realized: SimulationResult,
    /// Error of the planner's population model on the reference menu.
    pub learning_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: PhaseSeeds,
    pub fitted_model: PopulationModel,
    pub learned: PlannerRow,
    pub oracle: PlannerRow,
    pub zero_price: PlannerRow,
    /// Riders fit on the fastest road at free flow with zero prices.
    pub zero_price_baseline_fits: bool,
    pub learning_curve: Vec<CurvePoint>,
    pub learned_plan: Plan,
    pub learned_evaluation: PlanEvaluation,
    pub search_log: Vec<SearchLogEntry>,
}

#[allow(clippy::too_many_arguments)]
fn play(
    scenario: &Scenario,
    problem: &PlanningProblem,
    name: &str,
    plan: &Plan,
    planned: &PlanEvaluation,
    population: &Population,
    seeds: PhaseSeeds,
    model: &PopulationModel,
) -> Result<PlannerRow, SimulationError> {
    let menu = plan.menu().map_err(PlannerError::from)?;
    let (q, _) = simulate_choices(population, &menu, &scenario.simulation_noise, seeds.simulation)?;
    let realized = evaluate_realized(problem, plan, planned, q, seeds)?;
    Ok(PlannerRow {
        name: name.to_string(),
        ell: plan.ell.0.clone(),
        prices: plan.prices.clone(),
        planned_j: planned.j,
        planned_feasible: planned.feasible,
        realized,
        learning_error: learning_error(model, &scenario.truth, &scenario.reference_menu),
    })
}

pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentReport, SimulationError> {
    let seeds = PhaseSeeds::from_base(scenario.seed);
    if scenario.learning_users > scenario.population_size {
        return Err(SimulationError::NotEnoughUsers {
            wanted: scenario.learning_users,
            available: scenario.population_size,
        });
    }
    let population = sample_population(&scenario.truth, scenario.population_size, seeds.population)?;
    let learners = Population {
        thetas: population.thetas[..scenario.learning_users].to_vec(),
    };
    let outcome = elicitation_phase(&learners, &scenario.elicitation, seeds.elicitation)?;
    let curve = learning_curve(&outcome, &scenario.truth, &scenario.reference_menu);

    let learned_problem = PlanningProblem {
        population: outcome.model.clone(),
        ..scenario.problem.clone()
    };
    let search = optimize_logged(&learned_problem)?;
    // Realized outcomes are scored under the same problem; only q changes.
    let learned = play(
        scenario,
        &learned_problem,
        "learned",
        &search.plan,
        &search.evaluation,
        &population,
        seeds,
        &outcome.model,
    )?;

    let oracle_problem = PlanningProblem {
        population: scenario.truth.clone(),
        ..scenario.problem.clone()
    };
    let (oracle_plan, oracle_eval) = crate::planner::optimize(&oracle_problem)?;
    let oracle = play(
        scenario,
        &oracle_problem,
        "oracle",
        &oracle_plan,
        &oracle_eval,
        &population,
        seeds,
        &scenario.truth,
    )?;

    let free_flow = oracle_problem.network.free_flow_latencies();
    let zeros = vec![0.0; free_flow.len()];
    let (zero_plan, zero_eval) = evaluate_menu(&oracle_problem, &free_flow, &zeros)?;
    let zero_price = play(
        scenario,
        &oracle_problem,
        "zero_price",
        &zero_plan,
        &zero_eval,
        &population,
        seeds,
        &scenario.truth,
    )?;
    let zero_price_baseline_fits = oracle_problem
        .network
        .road(0)
        .is_feasible(free_flow[0], 0.0, oracle_problem.demand_a)
        .unwrap_or(false);

    Ok(ExperimentReport {
        seeds,
        fitted_model: outcome.model,
        learned,
        oracle,
        zero_price,
        zero_price_baseline_fits,
        learning_curve: curve,
        learned_plan: search.plan,
        learned_evaluation: search.evaluation,
        search_log: search.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::candidate_queries;
    use approx::assert_abs_diff_eq;

    #[test]
    fn population_sampling() {
        let pm = PopulationModel::point_mass(0.3).unwrap();
        let pop = sample_population(&pm, 100, 1).unwrap();
        assert!(pop.thetas.iter().all(|&t| t == 0.3));
        let beta = PopulationModel::beta(2.0, 2.0).unwrap();
        let pop = sample_population(&beta, 100_000, 2).unwrap();
        let mean = pop.thetas.iter().sum::<f64>() / 100_000.0;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.01);
        assert_eq!(pop, sample_population(&beta, 100_000, 2).unwrap());
        assert_eq!(sample_population(&beta, 0, 2), Err(SimulationError::NoUsers));
    }

    #[test]
    fn homogeneous_deterministic_choices_are_one_hot() {
        let pop = Population { thetas: vec![0.5; 200] };
        let menu = Menu::from_pairs(&[(50.0, 4.0), (70.0, 1.0)]).unwrap();
        let (q, picks) = simulate_choices(&pop, &menu, &ChoiceNoise::deterministic(), 3).unwrap();
        assert_eq!(q.0, vec![1.0, 0.0]);
        assert!(picks.iter().all(|&c| c == 0));
        let noisy = ChoiceNoise::noisy(5.0).unwrap();
        assert_eq!(
            simulate_choices(&pop, &menu, &noisy, 3).unwrap(),
            simulate_choices(&pop, &menu, &noisy, 3).unwrap()
        );
    }

    #[test]
    fn elicitation_requires_budget_and_is_deterministic() {
        let lat: Vec<f64> = (0..8).map(|i| 40.0 + 5.0 * i as f64).collect();
        let price: Vec<f64> = (0..8).map(|i| 5.0 * i as f64).collect();
        let mut config = ElicitationConfig {
            query_budget: 0,
            noise: ChoiceNoise::noisy(0.5).unwrap(),
            candidates: candidate_queries(&lat, &price),
            prior: PopulationModel::uniform(),
            mh: MhSettings { steps: 1200, burn_in: 400, proposal_sd: 0.1 },
            strategy: QueryStrategy::Active,
        };
        let pop = Population { thetas: vec![0.2, 0.7, 0.5] };
        assert!(matches!(
            elicitation_phase(&pop, &config, 1),
            Err(SimulationError::Learning(LearningError::ZeroBudget))
        ));
        config.query_budget = 4;
        let a = elicitation_phase(&pop, &config, 1).unwrap();
        let b = elicitation_phase(&pop, &config, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curve.len(), 5);
        assert_eq!(a.observations.len(), 12);
        assert_eq!(a.curve.last(), Some(&a.model));
    }
}
