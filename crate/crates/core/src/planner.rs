//! Choosing posted latencies and prices.
//!
//! Riders split across the menu according to the population choice
//! distribution `q`, so the autonomous flow is `f_a = F_a * q`. Whatever road
//! space they leave is filled by human drivers, fastest posted latency first.
//! The social cost `J` is the flow-averaged latency, with unserved human
//! demand charged a penalty latency. A menu is admissible when the riders fit
//! on their roads and revenue reaches the operator's profit floor.
//!
//! At an optimum, every road used by human drivers and every faster road is
//! posted at the free-flow latency of the slowest human-used road: otherwise
//! [`appendix_transform`] lowers those latencies, raises prices by the
//! matching exchange rate, keeps `q` unchanged and strictly lowers `J`.
//! [`optimize`] searches only configurations of that shape; [`brute_force`]
//! searches the full grid and serves as the oracle for it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{
    dominated_set, ChoiceDistribution, ChoiceError, ChoiceNoise, Menu, PreparedPopulation, WeightVector,
};
use crate::population::PopulationModel;
use crate::road::{CongestionProfile, FlowAssignment, Network, RoadError, TOL};

/// Largest grid `brute_force` agrees to enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;
/// Largest reduced grid `optimize` agrees to enumerate.
pub const OPTIMIZE_LIMIT: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("no candidate menu satisfies the profit floor and capacity constraints")]
    Infeasible,
    #[error("search space of {candidates} candidates exceeds the limit of {limit}")]
    SearchSpaceTooLarge { candidates: u64, limit: u64 },
    #[error("total demand is zero")]
    ZeroDemand,
    #[error("raised price {price} on road {road} exceeds the cap {cap}")]
    PriceCapExceeded { road: usize, price: f64, cap: f64 },
    #[error("road {road} is already at free flow or the requested latency {requested} s is not below {current} s")]
    NotImprovable { road: usize, current: f64, requested: f64 },
    #[error("price weight is zero; latency cannot be exchanged for price")]
    ZeroPriceWeight,
    #[error("plan carries no human flow")]
    NoHumanFlow,
    #[error("roads 0..={k} must share one latency, road {road} is at {ell} s instead of {ell_k} s")]
    UnequalLatencies { k: usize, road: usize, ell: f64, ell_k: f64 },
    #[error("invalid planning problem: `{field}` {reason}")]
    InvalidProblem { field: &'static str, reason: String },
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub network: Network,
    /// Human-driven demand, veh/s.
    pub demand_h: f64,
    /// Autonomous-service demand, veh/s.
    pub demand_a: f64,
    /// Minimum revenue per second.
    pub profit_floor: f64,
    pub price_cap: f64,
    pub latency_cap: f64,
    /// Latency charged per unit of unserved human demand.
    pub penalty_latency: f64,
    pub latency_grid: usize,
    pub price_grid: usize,
    pub population: PopulationModel,
    pub noise: ChoiceNoise,
}

impl PlanningProblem {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let invalid = |field: &'static str, reason: String| Err(PlannerError::InvalidProblem { field, reason });
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !nonneg(self.demand_h) {
            return invalid("demand_h", format!("must be finite and >= 0, got {}", self.demand_h));
        }
        if !nonneg(self.demand_a) {
            return invalid("demand_a", format!("must be finite and >= 0, got {}", self.demand_a));
        }
        if !nonneg(self.profit_floor) {
            return invalid("profit_floor", format!("must be finite and >= 0, got {}", self.profit_floor));
        }
        if !nonneg(self.price_cap) {
            return invalid("price_cap", format!("must be finite and >= 0, got {}", self.price_cap));
        }
        let slowest = self.network.free_flow_latencies().into_iter().fold(0.0, f64::max);
        if !(self.latency_cap.is_finite() && self.latency_cap >= slowest) {
            return invalid(
                "latency_cap",
                format!("must be >= the slowest free-flow latency {slowest} s, got {}", self.latency_cap),
            );
        }
        if !(self.penalty_latency.is_finite() && self.penalty_latency > self.latency_cap) {
            return invalid(
                "penalty_latency",
                format!("must exceed latency_cap {}, got {}", self.latency_cap, self.penalty_latency),
            );
        }
        if self.latency_grid < 2 {
            return invalid("latency_grid", format!("needs at least 2 points, got {}", self.latency_grid));
        }
        if self.price_grid < 2 {
            return invalid("price_grid", format!("needs at least 2 points, got {}", self.price_grid));
        }
        self.population.validate().map_err(|e| PlannerError::InvalidProblem {
            field: "population",
            reason: e.to_string(),
        })?;
        if self.noise.mode == crate::choice::ChoiceMode::Noisy {
            self.noise.validate()?;
        }
        Ok(())
    }

    pub fn total_demand(&self) -> f64 {
        self.demand_h + self.demand_a
    }

    /// Latency grid of road `i`, from its free-flow latency to the cap.
    pub fn latency_points(&self, i: usize) -> Vec<f64> {
        linspace(self.network.road(i).free_flow_latency(), self.latency_cap, self.latency_grid)
    }

    pub fn price_points(&self) -> Vec<f64> {
        linspace(0.0, self.price_cap, self.price_grid)
    }

    /// Largest spacing of any road's latency grid.
    pub fn latency_step(&self) -> f64 {
        (0..self.network.len())
            .map(|i| (self.latency_cap - self.network.road(i).free_flow_latency()) / (self.latency_grid - 1) as f64)
            .fold(0.0, f64::max)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub ell: CongestionProfile,
    pub prices: Vec<f64>,
    pub flows: FlowAssignment,
    pub q: ChoiceDistribution,
}

impl Plan {
    pub fn menu(&self) -> Result<Menu, ChoiceError> {
        Menu::from_pairs(
            &self
                .ell
                .as_slice()
                .iter()
                .copied()
                .zip(self.prices.iter().copied())
                .collect::<Vec<_>>(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    /// Social cost, seconds.
    pub j: f64,
    pub profit: f64,
    pub unserved_h: f64,
    /// Riders fit on every road and the profit floor is met.
    pub feasible: bool,
    pub autonomous_fits: bool,
    pub profit_ok: bool,
    /// Slowest (highest-index) road carrying human flow.
    pub k: Option<usize>,
}

/// Selfish human routing: fill roads in ascending posted latency, splitting
/// an equal-latency class in proportion to residual capacity.
pub fn human_fill(ell: &[f64], residual: &[f64], demand_h: f64) -> (Vec<f64>, f64) {
    let n = ell.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| ell[x].total_cmp(&ell[y]).then(x.cmp(&y)));
    let mut f_h = vec![0.0; n];
    let mut remaining = demand_h;
    let mut start = 0;
    while start < n && remaining > 0.0 {
        let mut end = start + 1;
        while end < n && ell[order[end]] - ell[order[start]] <= TOL {
            end += 1;
        }
        let class = &order[start..end];
        let capacity: f64 = class.iter().map(|&i| residual[i].max(0.0)).sum();
        if capacity <= remaining {
            for &i in class {
                f_h[i] = residual[i].max(0.0);
            }
            remaining -= capacity;
        } else if capacity > 0.0 {
            for &i in class {
                f_h[i] = remaining * residual[i].max(0.0) / capacity;
            }
            remaining = 0.0;
        }
        start = end;
    }
    (f_h, remaining.max(0.0))
}

// Human capacity left next to the riders; zero where riders alone overflow.
fn residuals(network: &Network, ell: &[f64], f_a: &[f64]) -> Result<(Vec<f64>, bool), RoadError> {
    let mut fits = true;
    let mut out = Vec::with_capacity(ell.len());
    for (i, road) in network.roads().iter().enumerate() {
        match road.residual_human_capacity(ell[i], f_a[i]) {
            Ok(r) => out.push(r),
            Err(RoadError::AutonomousFlowInfeasible { .. }) => {
                fits = false;
                out.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, fits))
}

/// No human driver can move to a strictly faster road with spare room.
pub fn wardrop_consistent(plan: &Plan, network: &Network, tol: f64) -> bool {
    let ell = plan.ell.as_slice();
    let spare: Vec<f64> = network
        .roads()
        .iter()
        .enumerate()
        .map(|(j, road)| {
            road.residual_human_capacity(ell[j], plan.flows.f_a[j])
                .map(|r| r - plan.flows.f_h[j])
                .unwrap_or(0.0)
        })
        .collect();
    (0..ell.len()).filter(|&i| plan.flows.f_h[i] > tol).all(|i| {
        (0..ell.len()).all(|j| !(ell[j] < ell[i] - tol && spare[j] > tol))
    })
}

pub fn profit(plan: &Plan) -> f64 {
    plan.prices.iter().zip(&plan.flows.f_a).map(|(p, f)| p * f).sum()
}

/// Flow-averaged latency with unserved human demand at the penalty latency.
pub fn objective_j(plan: &Plan, unserved_h: f64, problem: &PlanningProblem) -> Result<f64, PlannerError> {
    let total = problem.total_demand();
    if total <= 0.0 {
        return Err(PlannerError::ZeroDemand);
    }
    let travel: f64 = plan
        .ell
        .as_slice()
        .iter()
        .zip(plan.flows.f_h.iter().zip(&plan.flows.f_a))
        .map(|(l, (h, a))| l * (h + a))
        .sum();
    Ok((travel + problem.penalty_latency * unserved_h) / total)
}

fn highest_human_road(f_h: &[f64], tol: f64) -> Option<usize> {
    f_h.iter().rposition(|&f| f > tol)
}

/// Builds and scores the plan for posted `(ell, prices)` given the rider
/// split `q`.
pub fn evaluate_with_q(
    problem: &PlanningProblem,
    ell: &[f64],
    prices: &[f64],
    q: ChoiceDistribution,
) -> Result<(Plan, PlanEvaluation), PlannerError> {
    let network = &problem.network;
    let profile = CongestionProfile::new(network, ell.to_vec())?;
    let f_a: Vec<f64> = q.as_slice().iter().map(|x| problem.demand_a * x).collect();
    let (residual, autonomous_fits) = residuals(network, ell, &f_a)?;
    let (f_h, unserved_h) = human_fill(ell, &residual, problem.demand_h);
    let plan = Plan {
        ell: profile,
        prices: prices.to_vec(),
        flows: FlowAssignment { f_h, f_a },
        q,
    };
    let j = objective_j(&plan, unserved_h, problem)?;
    let revenue = profit(&plan);
    let profit_ok = revenue >= problem.profit_floor - TOL;
    let k = highest_human_road(&plan.flows.f_h, TOL);
    let eval = PlanEvaluation {
        j,
        profit: revenue,
        unserved_h,
        feasible: autonomous_fits && profit_ok,
        autonomous_fits,
        profit_ok,
        k,
    };
    Ok((plan, eval))
}

/// Scores a posted menu under the problem's population.
pub fn evaluate_menu(problem: &PlanningProblem, ell: &[f64], prices: &[f64]) -> Result<(Plan, PlanEvaluation), PlannerError> {
    let prepared = PreparedPopulation::new(&problem.population);
    evaluate_prepared(problem, &prepared, ell, prices)
}

fn evaluate_prepared(
    problem: &PlanningProblem,
    prepared: &PreparedPopulation,
    ell: &[f64],
    prices: &[f64],
) -> Result<(Plan, PlanEvaluation), PlannerError> {
    let menu = Menu::for_network(&problem.network, ell, prices)?;
    let q = prepared.aggregate_q(&menu, &problem.noise);
    evaluate_with_q(problem, ell, prices, q)
}

/// Summary of the candidates evaluated under one structure `k` (or the
/// whole grid for the oracle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchLogEntry {
    /// Number of roads pinned to a common latency; `None` for the full grid.
    pub pinned: Option<usize>,
    pub evaluated: u64,
    pub feasible: u64,
    pub best_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub plan: Plan,
    pub evaluation: PlanEvaluation,
    pub log: Vec<SearchLogEntry>,
}

// Mixed-radix decoding of candidate indices into grid coordinates.
struct Grid {
    /// Per-road latency choices; a single entry for pinned roads.
    latencies: Vec<Vec<f64>>,
    prices: Vec<f64>,
}

impl Grid {
    fn size(&self) -> u64 {
        let n = self.latencies.len() as u32;
        let lat: u64 = self.latencies.iter().map(|l| l.len() as u64).product();
        lat.saturating_mul((self.prices.len() as u64).saturating_pow(n))
    }

    // Lexicographic order: latencies of road 0..n, then prices of road 0..n,
    // with the last coordinate varying fastest.
    fn decode(&self, mut idx: u64, ell: &mut [f64], p: &mut [f64]) {
        let n = self.latencies.len();
        let m = self.prices.len() as u64;
        for i in (0..n).rev() {
            p[i] = self.prices[(idx % m) as usize];
            idx /= m;
        }
        for i in (0..n).rev() {
            let choices = &self.latencies[i];
            let len = choices.len() as u64;
            ell[i] = choices[(idx % len) as usize];
            idx /= len;
        }
    }
}

#[derive(Clone, Copy)]
struct Best {
    j: f64,
    order: u64,
}

fn better(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.j < x.j || (y.j == x.j && y.order < x.order) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

// Minimal feasible J over a grid, ties to the lowest enumeration order,
// with `offset` added to every order index. The fold is associative and
// commutative, so the parallel reduction is order-independent.
fn search_grid(
    problem: &PlanningProblem,
    prepared: &PreparedPopulation,
    grid: &Grid,
    offset: u64,
) -> Result<(Option<Best>, u64), PlannerError> {
    let n = problem.network.len();
    let size = grid.size();
    (0..size)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(ell, p), idx| -> Result<(Option<Best>, u64), PlannerError> {
                grid.decode(idx, ell, p);
                let (_, eval) = evaluate_prepared(problem, prepared, ell, p)?;
                Ok(if eval.feasible {
                    (Some(Best { j: eval.j, order: offset + idx }), 1)
                } else {
                    (None, 0)
                })
            },
        )
        .try_reduce(|| (None, 0), |a, b| Ok((better(a.0, b.0), a.1 + b.1)))
}

fn finish(
    problem: &PlanningProblem,
    prepared: &PreparedPopulation,
    grids: &[(Option<usize>, Grid)],
    best: Option<Best>,
    log: Vec<SearchLogEntry>,
) -> Result<SearchOutcome, PlannerError> {
    let best = best.ok_or(PlannerError::Infeasible)?;
    let n = problem.network.len();
    let (mut ell, mut p) = (vec![0.0; n], vec![0.0; n]);
    let mut order = best.order;
    for (_, grid) in grids {
        if order < grid.size() {
            grid.decode(order, &mut ell, &mut p);
            break;
        }
        order -= grid.size();
    }
    let (plan, evaluation) = evaluate_prepared(problem, prepared, &ell, &p)?;
    Ok(SearchOutcome { plan, evaluation, log })
}

fn run_search(
    problem: &PlanningProblem,
    grids: Vec<(Option<usize>, Grid)>,
    limit: u64,
) -> Result<SearchOutcome, PlannerError> {
    problem.validate()?;
    if problem.total_demand() <= 0.0 {
        return Err(PlannerError::ZeroDemand);
    }
    let total = grids.iter().fold(0u64, |acc, (_, g)| acc.saturating_add(g.size()));
    if total > limit {
        return Err(PlannerError::SearchSpaceTooLarge { candidates: total, limit });
    }
    let prepared = PreparedPopulation::new(&problem.population);
    let mut best = None;
    let mut offset = 0;
    let mut log = Vec::with_capacity(grids.len());
    for (pinned, grid) in &grids {
        let (b, feasible) = search_grid(problem, &prepared, grid, offset)?;
        log.push(SearchLogEntry {
            pinned: *pinned,
            evaluated: grid.size(),
            feasible,
            best_j: b.map(|x| x.j),
        });
        best = better(best, b);
        offset += grid.size();
    }
    finish(problem, &prepared, &grids, best, log)
}

/// Searches configurations where roads `0..k` share the free-flow latency of
/// road `k - 1` (for each `k` in `1..=n`), the remaining roads range over
/// their latency grids, and every price ranges over the price grid.
pub fn optimize_logged(problem: &PlanningProblem) -> Result<SearchOutcome, PlannerError> {
    let n = problem.network.len();
    let prices = problem.price_points();
    let a = problem.network.free_flow_latencies();
    let grids = (1..=n)
        .map(|k| {
            let latencies = (0..n)
                .map(|i| if i < k { vec![a[k - 1]] } else { problem.latency_points(i) })
                .collect();
            (Some(k), Grid { latencies, prices: prices.clone() })
        })
        .collect();
    run_search(problem, grids, OPTIMIZE_LIMIT)
}

pub fn optimize(problem: &PlanningProblem) -> Result<(Plan, PlanEvaluation), PlannerError> {
    optimize_logged(problem).map(|o| (o.plan, o.evaluation))
}

/// Exhaustive search of the full latency and price grid.
pub fn brute_force_logged(problem: &PlanningProblem) -> Result<SearchOutcome, PlannerError> {
    let n = problem.network.len();
    let grid = Grid {
        latencies: (0..n).map(|i| problem.latency_points(i)).collect(),
        prices: problem.price_points(),
    };
    if n > 3 {
        return Err(PlannerError::SearchSpaceTooLarge {
            candidates: grid.size(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    run_search(problem, vec![(None, grid)], BRUTE_FORCE_LIMIT)
}

pub fn brute_force(problem: &PlanningProblem) -> Result<(Plan, PlanEvaluation), PlannerError> {
    brute_force_logged(problem).map(|o| (o.plan, o.evaluation))
}

/// Every road up to the slowest human-used one is posted no slower than that
/// road's free-flow latency. Vacuously true without human flow.
pub fn proposition_holds(plan: &Plan, network: &Network, tol: f64) -> bool {
    let Some(k) = highest_human_road(&plan.flows.f_h, tol) else {
        return true;
    };
    let a_k = network.road(k).free_flow_latency();
    plan.ell.as_slice()[..=k].iter().all(|&l| l <= a_k + tol)
}

/// Lowers the common latency of roads `0..=k` to `ell_k_new` and raises the
/// price of those roads and of every dominated option by
/// `eps = (omega_1 / omega_2) * (ell_k - ell_k_new)`, which leaves every
/// rider's reward unchanged for a homogeneous population at `w`. Flows are
/// recomputed from scratch.
pub fn appendix_transform(
    plan: &Plan,
    problem: &PlanningProblem,
    w: WeightVector,
    ell_k_new: f64,
) -> Result<Plan, PlannerError> {
    let network = &problem.network;
    let k = highest_human_road(&plan.flows.f_h, TOL).ok_or(PlannerError::NoHumanFlow)?;
    let ell = plan.ell.as_slice();
    let ell_k = ell[k];
    let a_k = network.road(k).free_flow_latency();
    if ell_k <= a_k + TOL || ell_k_new.is_nan() || ell_k_new >= ell_k {
        return Err(PlannerError::NotImprovable {
            road: k,
            current: ell_k,
            requested: ell_k_new,
        });
    }
    if ell_k_new < a_k - TOL {
        return Err(RoadError::LatencyBelowFreeFlow {
            ell: ell_k_new,
            free_flow: a_k,
        }
        .into());
    }
    if let Some((road, &l)) = ell[..k].iter().enumerate().find(|(_, &l)| (l - ell_k).abs() > TOL) {
        return Err(PlannerError::UnequalLatencies { k, road, ell: l, ell_k });
    }
    if w.price_weight() == 0.0 {
        return Err(PlannerError::ZeroPriceWeight);
    }
    let eps = w.latency_weight() / w.price_weight() * (ell_k - ell_k_new);
    let dominated = dominated_set(&plan.menu()?);

    let mut new_ell = ell.to_vec();
    new_ell[..=k].iter_mut().for_each(|l| *l = ell_k_new);
    let mut new_prices = plan.prices.clone();
    for (i, p) in new_prices.iter_mut().enumerate() {
        if i <= k || dominated.contains(&i) {
            *p += eps;
            if *p > problem.price_cap + TOL {
                return Err(PlannerError::PriceCapExceeded {
                    road: i,
                    price: *p,
                    cap: problem.price_cap,
                });
            }
        }
    }
    let homogeneous = PreparedPopulation::new(&PopulationModel::point_mass(w.theta()).expect("theta in [0, 1]"));
    let (new_plan, _) = evaluate_prepared(problem, &homogeneous, &new_ell, &new_prices)?;
    Ok(new_plan)
}

/// Re-scores an existing plan (flows as stored).
pub fn assess(plan: &Plan, problem: &PlanningProblem) -> Result<PlanEvaluation, PlannerError> {
    let served: f64 = plan.flows.f_h.iter().sum();
    let unserved_h = (problem.demand_h - served).max(0.0);
    let j = objective_j(plan, unserved_h, problem)?;
    let revenue = profit(plan);
    let autonomous_fits = problem
        .network
        .roads()
        .iter()
        .enumerate()
        .all(|(i, r)| r.is_feasible(plan.ell.as_slice()[i], 0.0, plan.flows.f_a[i]).unwrap_or(false));
    let profit_ok = revenue >= problem.profit_floor - TOL;
    Ok(PlanEvaluation {
        j,
        profit: revenue,
        unserved_h,
        feasible: autonomous_fits && profit_ok,
        autonomous_fits,
        profit_ok,
        k: highest_human_road(&plan.flows.f_h, TOL),
    })
}
