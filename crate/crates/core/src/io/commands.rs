//! Command implementations behind the `mixroute` binary. Every command reads
//! one configuration, writes its artifacts under an output directory and
//! stamps each file with the crate version, the configuration hash and the
//! seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::{fit_population, infer_user, ElicitationSession, LearningError, Observation, PosteriorSamples};
use crate::planner::{
    optimize_logged, proposition_holds, wardrop_consistent, Plan, PlanEvaluation, PlannerError, SearchLogEntry,
};
use crate::population::PopulationModel;
use crate::seeds::{self, Phase};
use crate::simulator::{
    elicitation_phase, evaluate_realized, learning_curve, run_experiment, sample_population, simulate_choices,
    CurvePoint, ExperimentReport, PhaseSeeds, Population, SimulationError, SimulationResult,
};

use super::config::{ConfigError, LoadedConfig};
use super::records::{self, RecordsError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    /// Process exit status: 2 validation, 3 infeasible, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Io { .. }) | Self::Runtime(_) => 4,
            Self::Config(_) | Self::Validation(_) => 2,
            Self::Infeasible(_) => 3,
        }
    }
}

impl From<RecordsError> for CommandError {
    fn from(e: RecordsError) -> Self {
        match e {
            RecordsError::Csv(ref inner) if inner.is_io_error() => Self::Runtime(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<PlannerError> for CommandError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Infeasible => Self::Infeasible(e.to_string()),
            PlannerError::InvalidProblem { .. } | PlannerError::SearchSpaceTooLarge { .. } => {
                Self::Validation(e.to_string())
            }
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<SimulationError> for CommandError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Planner(p) => p.into(),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<LearningError> for CommandError {
    fn from(e: LearningError) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CommandError {
    CommandError::Runtime(format!("{}: {e}", path.display()))
}

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    fn comment(&self) -> String {
        format!("mixroute {} config_hash={} seed={}", self.version, self.config_hash, self.seed)
    }
}

/// A loaded configuration plus the seed and output directory in effect.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunContext {
    /// `seed` and `out` override the configuration's values when given.
    pub fn new(loaded: LoadedConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.unwrap_or(loaded.config.seed);
        let out = out.unwrap_or_else(|| PathBuf::from(&loaded.config.output_dir));
        Self { loaded, seed, out }
    }

    pub fn stamp(&self) -> Stamp {
        Stamp {
            version: VERSION.to_string(),
            config_hash: self.loaded.hash.clone(),
            seed: self.seed,
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CommandError> {
        fs::create_dir_all(&self.out).map_err(|e| io_error(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CommandError> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CommandError::Runtime(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CommandError> {
        let path = self.path(name)?;
        let mut buf = format!("# {}\n", self.stamp().comment()).into_bytes();
        {
            let mut wtr = csv::Writer::from_writer(&mut buf);
            let csv_err = |e: csv::Error| CommandError::Runtime(e.to_string());
            wtr.write_record(header).map_err(csv_err)?;
            for row in rows {
                wtr.write_record(row).map_err(csv_err)?;
            }
            wtr.flush().map_err(|e| io_error(&path, e))?;
        }
        fs::write(&path, buf).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn write_observations(&self, name: &str, observations: &[Observation]) -> Result<PathBuf, CommandError> {
        let path = self.path(name)?;
        let mut buf = Vec::new();
        records::write_observations(&mut buf, Some(&self.stamp().comment()), observations)?;
        fs::write(&path, buf).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// How `learn` obtains answers.
pub enum LearnSource<'a> {
    /// Simulated riders drawn from the configured population.
    Simulated,
    /// One rider answering on a terminal.
    Interactive {
        input: &'a mut dyn BufRead,
        output: &'a mut dyn Write,
    },
    /// Answers recorded in an observations file.
    Records(&'a Path),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub source: String,
    pub users: usize,
    pub observations: usize,
    pub model: PopulationModel,
    /// Posterior mean of each rider's θ, by user id.
    pub user_means: Vec<(u64, f64)>,
}

/// Parses and checks the contents of a model file.
pub fn parse_model(bytes: &[u8]) -> Result<ModelRecord, CommandError> {
    let record: ModelRecord = serde_json::from_slice(bytes).map_err(|e| CommandError::Validation(e.to_string()))?;
    record
        .model
        .validate()
        .map_err(|e| CommandError::Validation(e.to_string()))?;
    Ok(record)
}

pub fn load_model(path: &Path) -> Result<ModelRecord, CommandError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    parse_model(&bytes).map_err(|e| CommandError::Validation(format!("{}: {e}", path.display())))
}

/// Posteriors of every rider in `observations`, in user-id order, followed
/// by the population fit. This is the inference shared by all answer sources.
pub fn infer_population(
    ctx: &RunContext,
    observations: &[Observation],
) -> Result<(PopulationModel, Vec<(u64, PosteriorSamples)>), CommandError> {
    let config = &ctx.loaded.config;
    let mut by_user: BTreeMap<u64, Vec<Observation>> = BTreeMap::new();
    for o in observations {
        by_user.entry(o.user_id).or_default().push(*o);
    }
    if by_user.is_empty() {
        return Err(CommandError::Validation("no observations".into()));
    }
    let noise = config.answer_noise();
    let seed = seeds::phase_seed(ctx.seed, Phase::Inference);
    let groups: Vec<(u64, Vec<Observation>)> = by_user.into_iter().collect();
    let posteriors = groups
        .par_iter()
        .map(|(user, obs)| {
            infer_user(*user, obs, &config.learning.prior, &noise, &config.learning.mh, seed).map(|p| (*user, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<PosteriorSamples> = posteriors.iter().map(|(_, p)| p.clone()).collect();
    let model = fit_population(&samples)?;
    Ok((model, posteriors))
}

fn prompt_number(x: f64) -> String {
    // Grid values are usually whole; keep the prompt short when they are.
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

fn interactive_answers(
    ctx: &RunContext,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Vec<Observation>, CommandError> {
    let config = &ctx.loaded.config;
    let candidates = config.candidates();
    let mut session = ElicitationSession::new(
        0,
        config.learning.prior.clone(),
        config.answer_noise(),
        config.learning.mh,
        &candidates,
        config.learning.strategy,
        seeds::phase_seed(ctx.seed, Phase::Inference),
    )?;
    let budget = config.learning.query_budget;
    let io = |e: std::io::Error| CommandError::Runtime(format!("terminal: {e}"));
    for t in 1..=budget {
        let query = session.next_query()?;
        write!(
            output,
            "[{t}/{budget}] Option A: ℓ={}s, price={} | Option B: ℓ={}s, price={}\n> ",
            prompt_number(query.a.ell),
            prompt_number(query.a.price),
            prompt_number(query.b.ell),
            prompt_number(query.b.price),
        )
        .map_err(io)?;
        output.flush().map_err(io)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(io)? == 0 {
            return Err(CommandError::Validation(format!("input ended after {} answers", t - 1)));
        }
        let answer = records::parse_answer(&line)?;
        session.record(query, answer)?;
    }
    let (observations, _) = session.into_parts();
    Ok(observations)
}

/// Runs preference elicitation and writes `model.json` and
/// `observations.csv`, plus `learning_curve.csv` for simulated riders.
pub fn cmd_learn(ctx: &RunContext, source: LearnSource<'_>) -> Result<ModelRecord, CommandError> {
    let config = &ctx.loaded.config;
    let (label, observations, curve) = match source {
        LearnSource::Simulated => {
            let seeds = PhaseSeeds::from_base(ctx.seed);
            let population = sample_population(&config.population.truth, config.population.users, seeds.population)?;
            let learners = Population {
                thetas: population.thetas[..config.learning.users].to_vec(),
            };
            let outcome = elicitation_phase(&learners, &config.elicitation(), seeds.elicitation)?;
            let menu = config.reference_menu()?;
            let curve = learning_curve(&outcome, &config.population.truth, &menu);
            ("simulated", outcome.observations, Some(curve))
        }
        LearnSource::Interactive { input, output } => ("interactive", interactive_answers(ctx, input, output)?, None),
        LearnSource::Records(path) => {
            let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
            ("records", records::parse_observations(std::io::BufReader::new(file))?, None)
        }
    };
    let (model, posteriors) = infer_population(ctx, &observations)?;
    let record = ModelRecord {
        stamp: ctx.stamp(),
        source: label.to_string(),
        users: posteriors.len(),
        observations: observations.len(),
        model,
        user_means: posteriors.iter().map(|(u, p)| (*u, p.mean())).collect(),
    };
    ctx.write_json("model.json", &record)?;
    ctx.write_observations("observations.csv", &observations)?;
    if let Some(curve) = curve {
        write_curve(ctx, &curve)?;
    }
    Ok(record)
}

fn write_curve(ctx: &RunContext, curve: &[CurvePoint]) -> Result<PathBuf, CommandError> {
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|c| vec![c.queries.to_string(), num(c.learning_error)])
        .collect();
    ctx.write_csv("learning_curve.csv", &["queries", "learning_error"], &rows)
}

fn write_search_log(ctx: &RunContext, log: &[SearchLogEntry]) -> Result<PathBuf, CommandError> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|e| {
            vec![
                e.pinned.map(|k| k.to_string()).unwrap_or_default(),
                e.evaluated.to_string(),
                e.feasible.to_string(),
                opt_num(e.best_j),
            ]
        })
        .collect();
    ctx.write_csv("search_log.csv", &["pinned", "evaluated", "feasible", "best_j"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    #[serde(flatten)]
    pub stamp: Stamp,
    /// Population model the plan was optimized for.
    pub model: PopulationModel,
    pub plan: Plan,
    pub evaluation: PlanEvaluation,
    /// Roads up to the slowest one used by humans sit at a free-flow latency
    /// (within one latency grid step).
    pub proposition_holds: bool,
    pub wardrop_consistent: bool,
}

/// Parses the contents of a plan file and checks that it is internally
/// consistent: one latency, price, share and pair of flows per road, all
/// finite, with shares forming a distribution.
pub fn parse_plan(bytes: &[u8]) -> Result<PlanRecord, CommandError> {
    let record: PlanRecord = serde_json::from_slice(bytes).map_err(|e| CommandError::Validation(e.to_string()))?;
    let p = &record.plan;
    let n = p.ell.0.len();
    let lens = [p.prices.len(), p.q.0.len(), p.flows.f_h.len(), p.flows.f_a.len()];
    if n == 0 || lens.iter().any(|&l| l != n) {
        return Err(CommandError::Validation("plan vectors disagree in length".into()));
    }
    let all = p.ell.0.iter().chain(&p.prices).chain(&p.q.0).chain(&p.flows.f_h).chain(&p.flows.f_a);
    if !all.clone().all(|x| x.is_finite()) || p.ell.0.iter().chain(&p.prices).chain(&p.q.0).any(|&x| x < 0.0) {
        return Err(CommandError::Validation("plan holds negative or non-finite values".into()));
    }
    if (p.q.0.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(CommandError::Validation("plan shares do not sum to one".into()));
    }
    record
        .model
        .validate()
        .map_err(|e| CommandError::Validation(e.to_string()))?;
    Ok(record)
}

pub fn load_plan(path: &Path) -> Result<PlanRecord, CommandError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    parse_plan(&bytes).map_err(|e| CommandError::Validation(format!("{}: {e}", path.display())))
}

fn plan_record(
    ctx: &RunContext,
    problem: &crate::planner::PlanningProblem,
    plan: Plan,
    evaluation: PlanEvaluation,
) -> PlanRecord {
    PlanRecord {
        stamp: ctx.stamp(),
        model: problem.population.clone(),
        proposition_holds: proposition_holds(&plan, &problem.network, problem.latency_step()),
        wardrop_consistent: wardrop_consistent(&plan, &problem.network, 1e-9),
        plan,
        evaluation,
    }
}

/// Optimizes latencies and prices for `model` (the configured truth when
/// `None`) and writes `plan.json` and `search_log.csv`.
pub fn cmd_plan(ctx: &RunContext, model: Option<&Path>) -> Result<PlanRecord, CommandError> {
    let config = &ctx.loaded.config;
    let population = match model {
        Some(path) => load_model(path)?.model,
        None => config.population.truth.clone(),
    };
    let problem = config.problem(population)?;
    let outcome = optimize_logged(&problem)?;
    let record = plan_record(ctx, &problem, outcome.plan, outcome.evaluation);
    ctx.write_json("plan.json", &record)?;
    write_search_log(ctx, &outcome.log)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub result: SimulationResult,
}

/// Plays a plan against the simulated population and writes
/// `simulation.json` and `simulation_roads.csv`.
pub fn cmd_simulate(ctx: &RunContext, plan_path: &Path) -> Result<SimulationRecord, CommandError> {
    let config = &ctx.loaded.config;
    let record = load_plan(plan_path)?;
    let problem = config.problem(record.model.clone())?;
    let n = problem.network.len();
    let plan = &record.plan;
    if plan.ell.0.len() != n || plan.prices.len() != n || plan.q.0.len() != n {
        return Err(CommandError::Validation(format!(
            "{}: plan has the wrong number of roads for this network ({n})",
            plan_path.display()
        )));
    }
    let seeds = PhaseSeeds::from_base(ctx.seed);
    let population = sample_population(&config.population.truth, config.population.users, seeds.population)?;
    let menu = plan
        .menu()
        .map_err(|e| CommandError::Validation(format!("{}: {e}", plan_path.display())))?;
    let (q, _) = simulate_choices(&population, &menu, &config.choice, seeds.simulation)?;
    let result = evaluate_realized(&problem, plan, &record.evaluation, q, seeds)?;
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            vec![
                i.to_string(),
                num(plan.ell.0[i]),
                num(plan.prices[i]),
                num(plan.q.0[i]),
                num(result.realized_q.0[i]),
                num(result.flows.f_h[i]),
                num(result.flows.f_a[i]),
            ]
        })
        .collect();
    let out = SimulationRecord {
        stamp: ctx.stamp(),
        result,
    };
    ctx.write_json("simulation.json", &out)?;
    ctx.write_csv(
        "simulation_roads.csv",
        &["road", "ell", "price", "planned_q", "realized_q", "f_h", "f_a"],
        &rows,
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// The configuration exactly as read.
    pub config_source: String,
    pub report: ExperimentReport,
    pub plan: PlanRecord,
}

/// Runs the full pipeline with baselines, writes `bundle.json`,
/// `learning_curve.csv` and `search_log.csv`, and prints a summary to `out`.
pub fn cmd_experiment(ctx: &RunContext, out: &mut dyn Write) -> Result<ResultBundle, CommandError> {
    let config = &ctx.loaded.config;
    let scenario = config.scenario(ctx.seed)?;
    let report = run_experiment(&scenario)?;
    let problem = crate::planner::PlanningProblem {
        population: report.fitted_model.clone(),
        ..scenario.problem.clone()
    };
    let plan = plan_record(ctx, &problem, report.learned_plan.clone(), report.learned_evaluation.clone());
    let bundle = ResultBundle {
        version: VERSION.to_string(),
        config_hash: ctx.loaded.hash.clone(),
        seed: ctx.seed,
        config_source: ctx.loaded.source.clone(),
        report,
        plan,
    };
    ctx.write_json("bundle.json", &bundle)?;
    write_curve(ctx, &bundle.report.learning_curve)?;
    write_search_log(ctx, &bundle.report.search_log)?;
    out.write_all(summary(&bundle).as_bytes())
        .map_err(|e| CommandError::Runtime(e.to_string()))?;
    Ok(bundle)
}

pub fn summary(bundle: &ResultBundle) -> String {
    let r = &bundle.report;
    let mut s = String::new();
    let _ = writeln!(s, "seed {}  config {}", bundle.seed, &bundle.config_hash[..12.min(bundle.config_hash.len())]);
    let _ = writeln!(
        s,
        "{:<11} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9}",
        "planner", "planned J", "realized J", "profit", "unserved", "q error", "feasible"
    );
    for row in [&r.learned, &r.oracle, &r.zero_price] {
        let _ = writeln!(
            s,
            "{:<11} {:>10.3} {:>10.3} {:>9.4} {:>9.4} {:>9.4} {:>9}",
            row.name,
            row.planned_j,
            row.realized.j,
            row.realized.profit,
            row.realized.unserved_h,
            row.learning_error,
            row.realized.feasible
        );
    }
    if !r.zero_price_baseline_fits {
        let _ = writeln!(s, "note: autonomous demand does not fit the fastest road at free flow");
    }
    let _ = writeln!(
        s,
        "plan ell={:?} prices={:?} proposition_holds={}",
        r.learned_plan.ell.0.iter().map(|x| round3(*x)).collect::<Vec<_>>(),
        r.learned_plan.prices.iter().map(|x| round3(*x)).collect::<Vec<_>>(),
        bundle.plan.proposition_holds
    );
    let curve: Vec<String> = r
        .learning_curve
        .iter()
        .map(|c| format!("{}:{:.3}", c.queries, c.learning_error))
        .collect();
    let _ = writeln!(s, "learning error by queries  {}", curve.join(" "));
    s
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
