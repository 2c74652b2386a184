//! Reference computations shared by the integration tests. They are written
//! from the model definitions directly and avoid the library's own
//! numerics.

#![allow(dead_code)]

use mixroute::choice::{ChoiceNoise, Menu};
use mixroute::learning::Observation;
use mixroute::planner::PlanningProblem;
use mixroute::population::PopulationModel;
use mixroute::road::{Network, Road};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

pub const QUADRATURE_POINTS: usize = 4096;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Occupancy capacity `v / (L + tau v)` at the speed implied by `ell`.
pub fn capacity_closed_form(length: f64, vehicle_length: f64, tau_h: f64, tau_a: f64, ell: f64, alpha: f64) -> f64 {
    let v = length / ell;
    v / ((1.0 - alpha) * (vehicle_length + tau_h * v) + alpha * (vehicle_length + tau_a * v))
}

fn ln_beta_pdf(alpha: f64, beta: f64, x: f64) -> f64 {
    ln_gamma(alpha + beta) - ln_gamma(alpha) - ln_gamma(beta) + (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln()
}

/// Probability of the recorded answer under `q_i ∝ exp(r_i / beta)` with
/// `r = -(1 - theta) ell - theta price`.
fn answer_probability(theta: f64, obs: &Observation, beta: f64) -> f64 {
    let r = |ell: f64, price: f64| -(1.0 - theta) * ell - theta * price;
    let ra = r(obs.query.a.ell, obs.query.a.price);
    let rb = r(obs.query.b.ell, obs.query.b.price);
    let (chosen, other) = if obs.answer == 0 { (ra, rb) } else { (rb, ra) };
    1.0 / (1.0 + ((other - chosen) / beta).exp())
}

/// Posterior mean of `theta` by midpoint quadrature on a fine grid.
pub fn quadrature_posterior_mean(observations: &[Observation], prior: (f64, f64), beta: f64) -> f64 {
    let n = QUADRATURE_POINTS;
    let log_w: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            ln_beta_pdf(prior.0, prior.1, t)
                + observations
                    .iter()
                    .map(|o| answer_probability(t, o, beta).max(1e-300).ln())
                    .sum::<f64>()
        })
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, lw) in log_w.iter().enumerate() {
        let t = (i as f64 + 0.5) / n as f64;
        let w = (lw - top).exp();
        num += w * t;
        den += w;
    }
    num / den
}

/// Share of a Beta population choosing each option under exact argmax,
/// estimated by midpoint quadrature over `theta`. Ties go to the lower index.
pub fn quadrature_choice_shares(alpha: f64, beta: f64, menu: &Menu, points: usize) -> Vec<f64> {
    let mut shares = vec![0.0; menu.len()];
    let mut total = 0.0;
    for i in 0..points {
        let t = (i as f64 + 0.5) / points as f64;
        let w = ln_beta_pdf(alpha, beta, t).exp();
        let rewards: Vec<f64> = menu
            .options()
            .iter()
            .map(|o| -(1.0 - t) * o.ell - t * o.price)
            .collect();
        let mut best = 0;
        for (j, &r) in rewards.iter().enumerate() {
            if r > rewards[best] {
                best = j;
            }
        }
        shares[best] += w;
        total += w;
    }
    shares.iter().map(|s| s / total).collect()
}

/// A random network roughly around the canonical scenario's scale.
pub fn random_network<R: Rng>(rng: &mut R, n: usize) -> Network {
    let roads = (0..n)
        .map(|_| {
            let length = rng.random_range(800.0..1200.0);
            let speed = rng.random_range(12.0..30.0);
            let tau_h = rng.random_range(1.5..2.5);
            let tau_a = rng.random_range(0.5..tau_h);
            Road::new(length, speed, 5.0, tau_h, tau_a).unwrap()
        })
        .collect();
    Network::new(roads).unwrap()
}

pub fn random_problem<R: Rng>(rng: &mut R, n: usize, latency_grid: usize, price_grid: usize) -> PlanningProblem {
    let network = random_network(rng, n);
    PlanningProblem {
        network,
        demand_h: rng.random_range(0.1..0.6),
        demand_a: rng.random_range(0.05..0.4),
        profit_floor: rng.random_range(0.0..0.3),
        price_cap: 10.0,
        latency_cap: 120.0,
        penalty_latency: 240.0,
        latency_grid,
        price_grid,
        population: PopulationModel::beta(rng.random_range(1.0..5.0), rng.random_range(1.0..5.0)).unwrap(),
        noise: ChoiceNoise::deterministic(),
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
