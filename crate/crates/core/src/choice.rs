//! How autonomous-service users pick among (latency, price) options.
//!
//! A user with price weight `theta` scores option `i` as
//! `-(1 - theta) * ell_i - theta * p_i` and, when acting deterministically,
//! takes the best-scoring option with ties going to the lowest index. Because
//! the score is linear in `theta`, the set of users choosing each option is a
//! union of intervals of `[0, 1]`, which lets the population choice
//! distribution be computed exactly from the population's cdf.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::PopulationModel;
use crate::road::{Network, RoadError};

/// Cells used for the noisy-mode quadrature over a continuous population.
pub const QUADRATURE_CELLS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChoiceError {
    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("menu option {index}: {reason}")]
    InvalidOption { index: usize, reason: String },
    #[error("menu has no options")]
    EmptyMenu,
    #[error("softmax temperature must be > 0, got {0}")]
    InvalidTemperature(f64),
    #[error(transparent)]
    Road(#[from] RoadError),
}

/// Trade-off between latency and price, normalised so the weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    theta: f64,
}

impl WeightVector {
    pub fn new(theta: f64) -> Result<Self, ChoiceError> {
        if (0.0..=1.0).contains(&theta) {
            Ok(Self { theta })
        } else {
            Err(ChoiceError::ThetaOutOfRange(theta))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Weight on latency, `omega_1`.
    pub fn latency_weight(&self) -> f64 {
        1.0 - self.theta
    }

    /// Weight on price, `omega_2`.
    pub fn price_weight(&self) -> f64 {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuOption {
    pub road_id: usize,
    pub ell: f64,
    pub price: f64,
}

impl MenuOption {
    pub fn new(road_id: usize, ell: f64, price: f64) -> Self {
        Self {
            road_id,
            ell,
            price,
        }
    }
}

/// One option per road, indexed like the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    options: Vec<MenuOption>,
}

impl Menu {
    /// Builds a menu from raw (latency, price) pairs without a network;
    /// option `i` is attributed to road `i`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, ChoiceError> {
        let options = pairs
            .iter()
            .enumerate()
            .map(|(i, &(ell, price))| MenuOption::new(i, ell, price))
            .collect();
        Self::new(options)
    }

    pub fn new(options: Vec<MenuOption>) -> Result<Self, ChoiceError> {
        if options.is_empty() {
            return Err(ChoiceError::EmptyMenu);
        }
        for (index, opt) in options.iter().enumerate() {
            if !(opt.price.is_finite() && opt.price >= 0.0) {
                return Err(ChoiceError::InvalidOption {
                    index,
                    reason: format!("price must be finite and >= 0, got {}", opt.price),
                });
            }
            if !(opt.ell.is_finite() && opt.ell > 0.0) {
                return Err(ChoiceError::InvalidOption {
                    index,
                    reason: format!("latency must be finite and > 0, got {}", opt.ell),
                });
            }
        }
        Ok(Self { options })
    }

    /// The posted menu for a network: latency `ell[i]` and price `prices[i]`
    /// on road `i`.
    pub fn for_network(network: &Network, ell: &[f64], prices: &[f64]) -> Result<Self, ChoiceError> {
        if ell.len() != network.len() || prices.len() != network.len() {
            return Err(ChoiceError::InvalidOption {
                index: ell.len().min(prices.len()),
                reason: format!("expected {} options", network.len()),
            });
        }
        for (road, &l) in network.roads().iter().zip(ell) {
            road.speed_at_latency(l)?;
        }
        let options = (0..network.len())
            .map(|i| MenuOption::new(i, ell[i], prices[i]))
            .collect();
        Self::new(options)
    }

    pub fn options(&self) -> &[MenuOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Probability vector over menu options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChoiceDistribution(pub Vec<f64>);

impl ChoiceDistribution {
    fn normalized(mut q: Vec<f64>) -> Self {
        let total: f64 = q.iter().sum();
        if total > 0.0 {
            q.iter_mut().for_each(|x| *x /= total);
        }
        Self(q)
    }

    pub fn one_hot(n: usize, i: usize) -> Self {
        let mut q = vec![0.0; n];
        q[i] = 1.0;
        Self(q)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Largest absolute componentwise difference.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    Deterministic,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceNoise {
    /// Softmax temperature in reward units.
    pub beta: f64,
    pub mode: ChoiceMode,
}

impl ChoiceNoise {
    pub fn deterministic() -> Self {
        Self {
            beta: 1.0,
            mode: ChoiceMode::Deterministic,
        }
    }

    pub fn noisy(beta: f64) -> Result<Self, ChoiceError> {
        let noise = Self {
            beta,
            mode: ChoiceMode::Noisy,
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<(), ChoiceError> {
        if self.beta.is_finite() && self.beta > 0.0 {
            Ok(())
        } else {
            Err(ChoiceError::InvalidTemperature(self.beta))
        }
    }
}

pub fn reward(w: WeightVector, opt: &MenuOption) -> f64 {
    -w.latency_weight() * opt.ell - w.price_weight() * opt.price
}

/// Indices of options beaten on both latency and price by some other option.
/// Of two identical options the later one counts as dominated.
pub fn dominated_set(menu: &Menu) -> BTreeSet<usize> {
    let opts = menu.options();
    (0..opts.len())
        .filter(|&i| {
            let oi = &opts[i];
            opts.iter().enumerate().any(|(j, oj)| {
                if j == i || oj.ell > oi.ell || oj.price > oi.price {
                    return false;
                }
                let strictly_better = oj.ell < oi.ell || oj.price < oi.price;
                strictly_better || j < i
            })
        })
        .collect()
}

// Rewards within this relative distance of the best count as tied.
fn tie_tolerance(rewards: impl Iterator<Item = f64>) -> f64 {
    1e-12 * rewards.map(f64::abs).fold(0.0, f64::max)
}

/// Reward-maximizing option, lowest index on ties.
pub fn choice_argmax(w: WeightVector, menu: &Menu) -> usize {
    let rewards: Vec<f64> = menu.options().iter().map(|o| reward(w, o)).collect();
    argmax_with_ties(&rewards)
}

fn argmax_with_ties(rewards: &[f64]) -> usize {
    let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_tolerance(rewards.iter().copied());
    rewards
        .iter()
        .position(|&r| r >= best - tol)
        .unwrap_or(0)
}

fn softmax_from_rewards(rewards: &[f64], beta: f64) -> Vec<f64> {
    let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = rewards.iter().map(|r| ((r - best) / beta).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|x| x / total).collect()
}

/// Noisy-rational choice probabilities, `q_i ∝ exp(r_i / beta)`. Uses the
/// temperature regardless of `noise.mode`.
pub fn choice_softmax(
    w: WeightVector,
    menu: &Menu,
    noise: &ChoiceNoise,
) -> Result<ChoiceDistribution, ChoiceError> {
    noise.validate()?;
    let rewards: Vec<f64> = menu.options().iter().map(|o| reward(w, o)).collect();
    Ok(ChoiceDistribution(softmax_from_rewards(&rewards, noise.beta)))
}

/// A maximal range of `theta` over which one option is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub option: usize,
}

impl ChoiceInterval {
    pub fn contains(&self, theta: f64) -> bool {
        let above = if self.lo_closed { theta >= self.lo } else { theta > self.lo };
        let below = if self.hi_closed { theta <= self.hi } else { theta < self.hi };
        above && below
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Partition of `[0, 1]` by the deterministic choice.
pub fn choice_intervals(menu: &Menu) -> Vec<ChoiceInterval> {
    let opts = menu.options();
    let mut cuts = vec![0.0, 1.0];
    for i in 0..opts.len() {
        for j in i + 1..opts.len() {
            // r_i - r_j = -dl + theta * (dl - dp) with dl, dp the i-minus-j gaps.
            let dl = opts[i].ell - opts[j].ell;
            let dp = opts[i].price - opts[j].price;
            let slope = dl - dp;
            if slope != 0.0 {
                let t = dl / slope;
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);

    let pick = |theta: f64| choice_argmax(WeightVector { theta }, menu);
    let mut intervals: Vec<ChoiceInterval> = Vec::new();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let option = pick(0.5 * (lo + hi));
        match intervals.last_mut() {
            Some(last) if last.option == option => last.hi = hi,
            _ => intervals.push(ChoiceInterval {
                lo,
                hi,
                lo_closed: false,
                hi_closed: false,
                option,
            }),
        }
    }
    // Endpoint ownership follows the tie rule at each boundary.
    let m = intervals.len();
    intervals[0].lo_closed = true;
    intervals[m - 1].hi_closed = true;
    for b in 0..m.saturating_sub(1) {
        let at = intervals[b].hi;
        if pick(at) == intervals[b].option {
            intervals[b].hi_closed = true;
        } else {
            intervals[b + 1].lo_closed = true;
        }
    }
    // Equal latencies (or equal prices) tie exactly at an endpoint; the tie
    // rule can then pick a different option there than just inside.
    for end in [0.0, 1.0] {
        let owner = pick(end);
        let idx = if end == 0.0 { 0 } else { intervals.len() - 1 };
        if intervals[idx].option != owner {
            let point = ChoiceInterval {
                lo: end,
                hi: end,
                lo_closed: true,
                hi_closed: true,
                option: owner,
            };
            if end == 0.0 {
                intervals[0].lo_closed = false;
                intervals.insert(0, point);
            } else {
                intervals[idx].hi_closed = false;
                intervals.push(point);
            }
        }
    }
    intervals
}

/// Option chosen at `theta` according to a precomputed partition.
pub fn interval_option(intervals: &[ChoiceInterval], theta: f64) -> Option<usize> {
    intervals.iter().find(|iv| iv.contains(theta)).map(|iv| iv.option)
}

/// Population choice distribution `q` for a menu.
pub fn aggregate_q(model: &PopulationModel, menu: &Menu, noise: &ChoiceNoise) -> ChoiceDistribution {
    PreparedPopulation::new(model).aggregate_q(menu, noise)
}

/// Sample sets larger than this are aggregated through sorted interval
/// counts instead of per-sample argmax.
const DIRECT_SAMPLE_LIMIT: usize = 256;

/// A population model preprocessed for repeated aggregation over many menus.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparedPopulation {
    Beta(PopulationModel),
    Samples(Vec<f64>),
}

impl PreparedPopulation {
    pub fn new(model: &PopulationModel) -> Self {
        match model {
            PopulationModel::Beta { .. } => Self::Beta(model.clone()),
            PopulationModel::Empirical { samples } => {
                let mut sorted = samples.clone();
                sorted.sort_by(f64::total_cmp);
                Self::Samples(sorted)
            }
        }
    }

    pub fn aggregate_q(&self, menu: &Menu, noise: &ChoiceNoise) -> ChoiceDistribution {
        match (self, noise.mode) {
            (Self::Samples(samples), ChoiceMode::Deterministic) if samples.len() > DIRECT_SAMPLE_LIMIT => {
                let mut q = vec![0.0; menu.len()];
                for iv in choice_intervals(menu) {
                    let lo = if iv.lo_closed {
                        samples.partition_point(|&x| x < iv.lo)
                    } else {
                        samples.partition_point(|&x| x <= iv.lo)
                    };
                    let hi = if iv.hi_closed {
                        samples.partition_point(|&x| x <= iv.hi)
                    } else {
                        samples.partition_point(|&x| x < iv.hi)
                    };
                    q[iv.option] += hi.saturating_sub(lo) as f64;
                }
                ChoiceDistribution::normalized(q)
            }
            (Self::Samples(samples), _) => aggregate_q_samples(samples, menu, noise),
            (Self::Beta(model), ChoiceMode::Deterministic) => {
                let mut q = vec![0.0; menu.len()];
                for iv in choice_intervals(menu) {
                    q[iv.option] += (model.cdf(iv.hi) - model.cdf(iv.lo)).max(0.0);
                }
                ChoiceDistribution::normalized(q)
            }
            (Self::Beta(model), ChoiceMode::Noisy) => {
                let mut q = vec![0.0; menu.len()];
                let mut prev = 0.0;
                for c in 0..QUADRATURE_CELLS {
                    let hi = (c + 1) as f64 / QUADRATURE_CELLS as f64;
                    let cdf_hi = model.cdf(hi);
                    let mass = (cdf_hi - prev).max(0.0);
                    prev = cdf_hi;
                    if mass == 0.0 {
                        continue;
                    }
                    let mid = (c as f64 + 0.5) / QUADRATURE_CELLS as f64;
                    let w = WeightVector { theta: mid };
                    let rewards: Vec<f64> = menu.options().iter().map(|o| reward(w, o)).collect();
                    for (qi, pi) in q.iter_mut().zip(softmax_from_rewards(&rewards, noise.beta)) {
                        *qi += mass * pi;
                    }
                }
                ChoiceDistribution::normalized(q)
            }
        }
    }
}

/// Choice distribution of a finite set of users.
pub fn aggregate_q_samples(thetas: &[f64], menu: &Menu, noise: &ChoiceNoise) -> ChoiceDistribution {
    let mut q = vec![0.0; menu.len()];
    let mut rewards = vec![0.0; menu.len()];
    for &theta in thetas {
        let w = WeightVector { theta };
        for (r, o) in rewards.iter_mut().zip(menu.options()) {
            *r = reward(w, o);
        }
        match noise.mode {
            ChoiceMode::Deterministic => q[argmax_with_ties(&rewards)] += 1.0,
            ChoiceMode::Noisy => {
                for (qi, pi) in q.iter_mut().zip(softmax_from_rewards(&rewards, noise.beta)) {
                    *qi += pi;
                }
            }
        }
    }
    ChoiceDistribution::normalized(q)
}

/// Draws one user's choice from `rng`.
pub fn sample_choice_with<R: Rng + ?Sized>(
    w: WeightVector,
    menu: &Menu,
    noise: &ChoiceNoise,
    rng: &mut R,
) -> usize {
    match noise.mode {
        ChoiceMode::Deterministic => choice_argmax(w, menu),
        ChoiceMode::Noisy => {
            let rewards: Vec<f64> = menu.options().iter().map(|o| reward(w, o)).collect();
            let probs = softmax_from_rewards(&rewards, noise.beta);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        }
    }
}

/// Seeded single draw; the same seed always yields the same index.
pub fn sample_user_choice(w: WeightVector, menu: &Menu, noise: &ChoiceNoise, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_choice_with(w, menu, noise, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn menu(pairs: &[(f64, f64)]) -> Menu {
        Menu::from_pairs(pairs).unwrap()
    }

    fn w(theta: f64) -> WeightVector {
        WeightVector::new(theta).unwrap()
    }

    #[test]
    fn reward_examples() {
        let opt = MenuOption::new(0, 50.0, 3.0);
        assert_eq!(reward(w(0.0), &opt), -50.0);
        assert_eq!(reward(w(0.5), &opt), -26.5);
        assert_eq!(reward(w(1.0), &opt), -3.0);
        assert!(WeightVector::new(1.5).is_err());
    }

    #[test]
    fn dominated_set_examples() {
        assert_eq!(dominated_set(&menu(&[(50.0, 4.0), (70.0, 5.0)])), BTreeSet::from([1]));
        assert!(dominated_set(&menu(&[(50.0, 4.0), (70.0, 1.0)])).is_empty());
        assert_eq!(
            dominated_set(&menu(&[(50.0, 4.0), (50.0, 4.0), (60.0, 2.0)])),
            BTreeSet::from([1])
        );
    }

    #[test]
    fn argmax_examples() {
        let m = menu(&[(50.0, 4.0), (70.0, 1.0)]);
        assert_eq!(choice_argmax(w(0.0), &m), 0);
        assert_eq!(choice_argmax(w(1.0), &m), 1);
        assert_eq!(choice_argmax(w(20.0 / 23.0), &m), 0);
    }

    #[test]
    fn softmax_examples() {
        let m = menu(&[(50.0, 4.0), (50.0, 4.0)]);
        let q = choice_softmax(w(0.3), &m, &ChoiceNoise::noisy(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(q.0[0], 0.5, epsilon = 1e-15);

        // rewards -26.5 and -36.5 at theta = 0.5
        let m = menu(&[(50.0, 3.0), (70.0, 3.0)]);
        let q = choice_softmax(w(0.5), &m, &ChoiceNoise::noisy(10.0).unwrap()).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(q.0[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(q.0[1], 1.0 - expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.7311, epsilon = 1e-4);

        let q = choice_softmax(w(0.5), &m, &ChoiceNoise::noisy(1e-6).unwrap()).unwrap();
        assert_abs_diff_eq!(q.0[0], 1.0, epsilon = 1e-6);
        assert!(choice_softmax(w(0.5), &m, &ChoiceNoise { beta: 0.0, mode: ChoiceMode::Noisy }).is_err());
    }

    #[test]
    fn intervals_examples() {
        let iv = choice_intervals(&menu(&[(50.0, 4.0), (70.0, 1.0)]));
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].lo, iv[0].option, iv[0].lo_closed, iv[0].hi_closed), (0.0, 0, true, true));
        assert_abs_diff_eq!(iv[0].hi, 20.0 / 23.0, epsilon = 1e-15);
        assert_eq!((iv[1].hi, iv[1].option, iv[1].lo_closed, iv[1].hi_closed), (1.0, 1, false, true));

        let single = choice_intervals(&menu(&[(50.0, 4.0)]));
        assert_eq!(single.len(), 1);
        assert_eq!((single[0].lo, single[0].hi, single[0].option), (0.0, 1.0, 0));

        let dominated = choice_intervals(&menu(&[(50.0, 4.0), (70.0, 5.0)]));
        assert_eq!(dominated.len(), 1);
        assert_eq!(dominated[0].option, 0);
    }

    #[test]
    fn aggregate_examples() {
        let m = menu(&[(50.0, 4.0), (70.0, 1.0)]);
        let det = ChoiceNoise::deterministic();
        let q = aggregate_q(&PopulationModel::point_mass(0.5).unwrap(), &m, &det);
        assert_eq!(q.0, vec![1.0, 0.0]);
        let q = aggregate_q(&PopulationModel::uniform(), &m, &det);
        assert_abs_diff_eq!(q.0[0], 20.0 / 23.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.0[1], 3.0 / 23.0, epsilon = 1e-12);
        let q = aggregate_q(&PopulationModel::beta(2.0, 5.0).unwrap(), &menu(&[(60.0, 1.0)]), &det);
        assert_eq!(q.0, vec![1.0]);
    }

    #[test]
    fn large_sample_sets_agree_with_direct_counting() {
        let m = menu(&[(50.0, 4.0), (70.0, 1.0), (60.0, 2.0)]);
        let det = ChoiceNoise::deterministic();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        samples.push(20.0 / 23.0);
        let fast = aggregate_q(&PopulationModel::empirical(samples.clone()).unwrap(), &m, &det);
        let slow = aggregate_q_samples(&samples, &m, &det);
        assert_eq!(fast, slow);
    }

    #[test]
    fn noisy_aggregate_approaches_deterministic_at_low_temperature() {
        let m = menu(&[(50.0, 4.0), (70.0, 1.0)]);
        let q = aggregate_q(&PopulationModel::uniform(), &m, &ChoiceNoise::noisy(1e-4).unwrap());
        assert_abs_diff_eq!(q.0[0], 20.0 / 23.0, epsilon = 1e-3);
        // a point mass averages a single softmax
        let pm = PopulationModel::point_mass(0.5).unwrap();
        let noise = ChoiceNoise::noisy(10.0).unwrap();
        let q = aggregate_q(&pm, &m, &noise);
        let direct = choice_softmax(w(0.5), &m, &noise).unwrap();
        assert_abs_diff_eq!(q.0[0], direct.0[0], epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let m = menu(&[(50.0, 4.0), (50.0, 4.0)]);
        let noise = ChoiceNoise::noisy(1.0).unwrap();
        let first = sample_user_choice(w(0.4), &m, &noise, 99);
        assert!((0..10).all(|_| sample_user_choice(w(0.4), &m, &noise, 99) == first));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zeros = (0..10_000)
            .filter(|_| sample_choice_with(w(0.4), &m, &noise, &mut rng) == 0)
            .count();
        let freq = zeros as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "frequency {freq}");

        let m = menu(&[(50.0, 4.0), (70.0, 1.0)]);
        let det = ChoiceNoise::deterministic();
        for i in 0..=100 {
            let wt = w(i as f64 / 100.0);
            assert_eq!(sample_user_choice(wt, &m, &det, i), choice_argmax(wt, &m));
        }
    }
}
