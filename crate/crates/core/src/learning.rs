//! Learning rider preferences from pairwise "A or B" answers.
//!
//! Each rider is modelled independently: answers follow a logit likelihood in
//! the reward gap between the two options, the posterior over the rider's
//! `theta` is sampled with a reflected random-walk Metropolis-Hastings chain,
//! and the next query is the candidate with the largest mutual information
//! between answer and `theta`. Pooled posteriors are moment-matched into a
//! Beta population model.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{aggregate_q, reward, ChoiceError, ChoiceNoise, Menu, MenuOption, WeightVector};
use crate::population::PopulationModel;
use crate::seeds;

/// Minimum number of retained samples per chain.
pub const MIN_POSTERIOR_SAMPLES: usize = 100;
/// Variance floor used when moment-matching a Beta population.
pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearningError {
    #[error("query options must differ")]
    IdenticalOptions,
    #[error("invalid query option: {0}")]
    InvalidOption(String),
    #[error("answer must be 0 or 1, got {0}")]
    InvalidAnswer(usize),
    #[error("chain needs steps >= burn_in + {MIN_POSTERIOR_SAMPLES}, got steps={steps}, burn_in={burn_in}")]
    ChainTooShort { steps: usize, burn_in: usize },
    #[error("proposal standard deviation must be > 0, got {0}")]
    InvalidProposal(f64),
    #[error("observations have zero likelihood everywhere")]
    DegenerateObservations,
    #[error("prior must have a density; empirical sample sets cannot be used as priors")]
    PriorWithoutDensity,
    #[error("no candidate queries")]
    NoCandidates,
    #[error("no posteriors to pool")]
    NoPosteriors,
    #[error("query budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

/// Two options shown side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub a: MenuOption,
    pub b: MenuOption,
}

impl Query {
    pub fn new(a: MenuOption, b: MenuOption) -> Result<Self, LearningError> {
        for opt in [&a, &b] {
            if !(opt.price.is_finite() && opt.price >= 0.0 && opt.ell.is_finite() && opt.ell > 0.0) {
                return Err(LearningError::InvalidOption(format!(
                    "latency {} s, price {}",
                    opt.ell, opt.price
                )));
            }
        }
        if a.ell == b.ell && a.price == b.price {
            return Err(LearningError::IdenticalOptions);
        }
        Ok(Self { a, b })
    }

    /// Builds a query from `(latency, price)` pairs.
    pub fn from_pairs(a: (f64, f64), b: (f64, f64)) -> Result<Self, LearningError> {
        Self::new(MenuOption::new(0, a.0, a.1), MenuOption::new(1, b.0, b.1))
    }

    pub fn option(&self, answer: usize) -> &MenuOption {
        if answer == 0 {
            &self.a
        } else {
            &self.b
        }
    }

    /// `theta` at which both options score the same, if inside `[0, 1]`.
    pub fn indifference_point(&self) -> Option<f64> {
        let dl = self.a.ell - self.b.ell;
        let slope = dl - (self.a.price - self.b.price);
        if slope == 0.0 {
            return None;
        }
        let t = dl / slope;
        (0.0..=1.0).contains(&t).then_some(t)
    }

    fn reward_gap(&self, theta: f64) -> f64 {
        let w = WeightVector::new(theta.clamp(0.0, 1.0)).expect("clamped theta");
        reward(w, &self.a) - reward(w, &self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub user_id: u64,
    pub query: Query,
    pub answer: usize,
}

impl Observation {
    pub fn new(user_id: u64, query: Query, answer: usize) -> Result<Self, LearningError> {
        if answer > 1 {
            return Err(LearningError::InvalidAnswer(answer));
        }
        Ok(Self {
            user_id,
            query,
            answer,
        })
    }
}

// ln(1 / (1 + exp(-x))) without overflow.
fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability that a rider with weight `theta` gives `answer`. Always uses
/// the logit temperature, whatever `noise.mode` says.
pub fn answer_likelihood(theta: f64, query: &Query, answer: usize, noise: &ChoiceNoise) -> f64 {
    let gap = query.reward_gap(theta) / noise.beta;
    if answer == 0 {
        logistic(gap)
    } else {
        logistic(-gap)
    }
}

fn ln_answer_likelihood(theta: f64, obs: &Observation, beta: f64) -> f64 {
    let gap = obs.query.reward_gap(theta) / beta;
    ln_logistic(if obs.answer == 0 { gap } else { -gap })
}

/// Unnormalized log posterior of `theta` for one rider.
pub fn ln_target(theta: f64, observations: &[Observation], prior: &PopulationModel, beta: f64) -> f64 {
    let lp = prior.ln_pdf(theta).unwrap_or(f64::NEG_INFINITY);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + observations
        .iter()
        .map(|o| ln_answer_likelihood(theta, o, beta))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhSettings {
    pub steps: usize,
    pub burn_in: usize,
    /// Initial random-walk standard deviation; tuned during burn-in.
    pub proposal_sd: f64,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            steps: 4000,
            burn_in: 1000,
            proposal_sd: 0.1,
        }
    }
}

impl MhSettings {
    pub fn validate(&self) -> Result<(), LearningError> {
        if self.steps < self.burn_in + MIN_POSTERIOR_SAMPLES {
            return Err(LearningError::ChainTooShort {
                steps: self.steps,
                burn_in: self.burn_in,
            });
        }
        if !(self.proposal_sd.is_finite() && self.proposal_sd > 0.0) {
            return Err(LearningError::InvalidProposal(self.proposal_sd));
        }
        Ok(())
    }
}

/// Equally weighted posterior draws of one rider's `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub thetas: Vec<f64>,
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub proposal_sd: f64,
}

impl PosteriorSamples {
    /// Wraps fixed draws, e.g. atoms of a discrete posterior.
    pub fn from_thetas(thetas: Vec<f64>) -> Self {
        let n = thetas.len();
        Self {
            thetas,
            acceptance_rate: 1.0,
            chain_length: n,
            proposal_sd: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.thetas.iter().sum::<f64>() / self.thetas.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.thetas.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / self.thetas.len() as f64
    }

    /// Every k-th draw so that at most `max` remain.
    pub fn thinned(&self, max: usize) -> Self {
        if self.thetas.len() <= max || max == 0 {
            return self.clone();
        }
        let stride = self.thetas.len().div_ceil(max);
        Self {
            thetas: self.thetas.iter().step_by(stride).copied().collect(),
            ..self.clone()
        }
    }
}

fn reflect(mut x: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > 1.0 {
            x = 2.0 - x;
        } else {
            return x;
        }
    }
}

/// Metropolis-Hastings over one rider's `theta` with Gaussian proposals
/// reflected into `[0, 1]`. The step size adapts toward a 0.44 acceptance
/// rate during burn-in and is frozen afterwards.
pub fn mh_posterior(
    observations: &[Observation],
    prior: &PopulationModel,
    noise: &ChoiceNoise,
    settings: &MhSettings,
    seed: u64,
) -> Result<PosteriorSamples, LearningError> {
    settings.validate()?;
    noise.validate()?;
    if prior.ln_pdf(0.5).is_none() {
        return Err(LearningError::PriorWithoutDensity);
    }
    let beta = noise.beta;
    let target = |t: f64| ln_target(t, observations, prior, beta);

    // Start from the best point of a coarse scan; this also detects an
    // everywhere-zero target.
    let (mut theta, mut current) = (0..=64)
        .map(|i| {
            let t = (i as f64 + 0.5) / 65.0;
            (t, target(t))
        })
        .fold((0.5, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    if current == f64::NEG_INFINITY {
        return Err(LearningError::DegenerateObservations);
    }

    let mut rng = seeds::stream_rng(seed, 0);
    let mut sd = settings.proposal_sd;
    let mut window_accepts = 0usize;
    let mut accepted_after_burn = 0usize;
    let mut thetas = Vec::with_capacity(settings.steps - settings.burn_in);
    for step in 0..settings.steps {
        let z: f64 = rng.sample(StandardNormal);
        let proposal = reflect(theta + sd * z);
        let cand = target(proposal);
        let u: f64 = rng.random();
        let accept = cand >= current || u.ln() < cand - current;
        if accept {
            theta = proposal;
            current = cand;
        }
        if step < settings.burn_in {
            window_accepts += accept as usize;
            if (step + 1) % 50 == 0 {
                let rate = window_accepts as f64 / 50.0;
                sd = if rate > 0.44 { sd * 1.25 } else { sd / 1.25 };
                sd = sd.clamp(1e-4, 1.0);
                window_accepts = 0;
            }
        } else {
            accepted_after_burn += accept as usize;
            thetas.push(theta);
        }
    }
    let kept = thetas.len();
    Ok(PosteriorSamples {
        thetas,
        acceptance_rate: accepted_after_burn as f64 / kept as f64,
        chain_length: settings.steps,
        proposal_sd: sd,
    })
}

/// Posterior for `user_id` from all of that rider's observations. The chain
/// seed depends only on `(seed, user_id, observations.len())`, so the same
/// answers always give the same samples however they were collected.
pub fn infer_user(
    user_id: u64,
    observations: &[Observation],
    prior: &PopulationModel,
    noise: &ChoiceNoise,
    settings: &MhSettings,
    seed: u64,
) -> Result<PosteriorSamples, LearningError> {
    let chain_seed = seeds::derive(seed, &[user_id, observations.len() as u64]);
    mh_posterior(observations, prior, noise, settings, chain_seed)
}

fn entropy_bits(p: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    h(p) + h(1.0 - p)
}

/// Mutual information in bits between the answer to `query` and `theta`
/// under the posterior.
pub fn expected_information_gain(posterior: &PosteriorSamples, query: &Query, noise: &ChoiceNoise) -> f64 {
    let n = posterior.thetas.len() as f64;
    let (sum_p, sum_h) = posterior
        .thetas
        .iter()
        .map(|&t| answer_likelihood(t, query, 0, noise))
        .fold((0.0, 0.0), |(sp, sh), p| (sp + p, sh + entropy_bits(p)));
    (entropy_bits(sum_p / n) - sum_h / n).clamp(0.0, 1.0)
}

/// Candidate with the largest information gain; earlier candidates win ties.
pub fn select_query<'a>(
    posterior: &PosteriorSamples,
    candidates: &'a [Query],
    noise: &ChoiceNoise,
) -> Result<&'a Query, LearningError> {
    let mut best: Option<(f64, &Query)> = None;
    for q in candidates {
        let ig = expected_information_gain(posterior, q, noise);
        match best {
            Some((b, _)) if ig <= b + 1e-12 => {}
            _ => best = Some((ig, q)),
        }
    }
    best.map(|(_, q)| q).ok_or(LearningError::NoCandidates)
}

/// Trade-off pairs from a latency grid and a price grid: option `a` is
/// faster and pricier than option `b`. Pairs repeating an earlier pair's
/// (latency gap, price gap) are dropped, since answers depend only on the
/// gaps.
pub fn candidate_queries(latencies: &[f64], prices: &[f64]) -> Vec<Query> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &la in latencies {
        for &pa in prices {
            for &lb in latencies {
                for &pb in prices {
                    if !(la < lb && pa > pb) {
                        continue;
                    }
                    let key = ((lb - la).to_bits(), (pa - pb).to_bits());
                    if !seen.insert(key) {
                        continue;
                    }
                    if let Ok(q) = Query::from_pairs((la, pa), (lb, pb)) {
                        out.push(q);
                    }
                }
            }
        }
    }
    out
}

/// Moment-matched Beta fit to the pooled draws, falling back to the pooled
/// draws themselves when no Beta has that mean and variance.
pub fn fit_population(posteriors: &[PosteriorSamples]) -> Result<PopulationModel, LearningError> {
    if posteriors.is_empty() || posteriors.iter().all(|p| p.thetas.is_empty()) {
        return Err(LearningError::NoPosteriors);
    }
    let (n, sum) = posteriors
        .iter()
        .flat_map(|p| &p.thetas)
        .fold((0usize, 0.0), |(n, s), t| (n + 1, s + t));
    let m = sum / n as f64;
    let ss = posteriors
        .iter()
        .flat_map(|p| &p.thetas)
        .fold(0.0, |acc, t| acc + (t - m) * (t - m));
    Ok(moment_match(m, ss / n as f64).unwrap_or_else(|| {
        let pooled = posteriors.iter().flat_map(|p| p.thetas.iter().copied()).collect();
        PopulationModel::Empirical { samples: pooled }
    }))
}

/// Beta with mean `m` and variance `var` (floored), if one exists.
pub fn moment_match(m: f64, var: f64) -> Option<PopulationModel> {
    let var = var.max(VARIANCE_FLOOR);
    let nu = m * (1.0 - m) / var - 1.0;
    if nu.is_nan() || nu <= 0.0 || !(m > 0.0 && m < 1.0) {
        return None;
    }
    PopulationModel::beta(m * nu, (1.0 - m) * nu).ok()
}

/// Largest choice-share error of `model` against `truth` on a menu.
pub fn learning_error(model: &PopulationModel, truth: &PopulationModel, reference_menu: &Menu) -> f64 {
    let det = ChoiceNoise::deterministic();
    aggregate_q(model, reference_menu, &det).linf_distance(&aggregate_q(truth, reference_menu, &det))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    /// Maximize expected information gain.
    Active,
    /// Uniform over the candidate set.
    Random,
}

/// Posterior draws used when scoring candidates.
pub const SELECTION_SAMPLES: usize = 256;

/// One rider's adaptive questioning: ask, record the answer, update the
/// posterior, repeat.
#[derive(Debug, Clone)]
pub struct ElicitationSession<'a> {
    user_id: u64,
    prior: PopulationModel,
    noise: ChoiceNoise,
    settings: MhSettings,
    candidates: &'a [Query],
    strategy: QueryStrategy,
    seed: u64,
    observations: Vec<Observation>,
    posterior: PosteriorSamples,
    picks: rand_chacha::ChaCha8Rng,
}

impl<'a> ElicitationSession<'a> {
    pub fn new(
        user_id: u64,
        prior: PopulationModel,
        noise: ChoiceNoise,
        settings: MhSettings,
        candidates: &'a [Query],
        strategy: QueryStrategy,
        seed: u64,
    ) -> Result<Self, LearningError> {
        if candidates.is_empty() {
            return Err(LearningError::NoCandidates);
        }
        let posterior = infer_user(user_id, &[], &prior, &noise, &settings, seed)?;
        let picks = seeds::stream_rng(seeds::derive(seed, &[user_id]), 1);
        Ok(Self {
            user_id,
            prior,
            noise,
            settings,
            candidates,
            strategy,
            seed,
            observations: Vec::new(),
            posterior,
            picks,
        })
    }

    pub fn next_query(&mut self) -> Result<Query, LearningError> {
        match self.strategy {
            QueryStrategy::Active => {
                let scored = self.posterior.thinned(SELECTION_SAMPLES);
                select_query(&scored, self.candidates, &self.noise).copied()
            }
            QueryStrategy::Random => {
                let i = self.picks.random_range(0..self.candidates.len());
                Ok(self.candidates[i])
            }
        }
    }

    pub fn record(&mut self, query: Query, answer: usize) -> Result<(), LearningError> {
        self.observations.push(Observation::new(self.user_id, query, answer)?);
        self.posterior = infer_user(
            self.user_id,
            &self.observations,
            &self.prior,
            &self.noise,
            &self.settings,
            self.seed,
        )?;
        Ok(())
    }

    pub fn posterior(&self) -> &PosteriorSamples {
        &self.posterior
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn into_parts(self) -> (Vec<Observation>, PosteriorSamples) {
        (self.observations, self.posterior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noise(beta: f64) -> ChoiceNoise {
        ChoiceNoise::noisy(beta).unwrap()
    }

    #[test]
    fn likelihood_examples() {
        let q = Query::from_pairs((50.0, 4.0), (50.0, 4.0 + 1e-12)).unwrap();
        assert_abs_diff_eq!(answer_likelihood(0.0, &q, 0, &noise(1.0)), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(answer_likelihood(0.0, &q, 1, &noise(1.0)), 0.5, epsilon = 1e-12);

        // theta = 0.5: rewards -26.5 vs -36.5, a gap of exactly beta
        let q = Query::from_pairs((50.0, 3.0), (70.0, 3.0)).unwrap();
        let p = answer_likelihood(0.5, &q, 0, &noise(10.0));
        assert_abs_diff_eq!(p, 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-12);

        let swapped = Query::new(q.b, q.a).unwrap();
        assert_eq!(
            answer_likelihood(0.3, &q, 1, &noise(2.0)),
            answer_likelihood(0.3, &swapped, 0, &noise(2.0))
        );
    }

    #[test]
    fn query_and_observation_validation() {
        assert_eq!(
            Query::from_pairs((50.0, 4.0), (50.0, 4.0)),
            Err(LearningError::IdenticalOptions)
        );
        assert!(Query::from_pairs((50.0, -1.0), (60.0, 1.0)).is_err());
        let q = Query::from_pairs((50.0, 4.0), (55.0, 1.0)).unwrap();
        assert_abs_diff_eq!(q.indifference_point().unwrap(), 0.625, epsilon = 1e-15);
        assert_eq!(Observation::new(0, q, 2), Err(LearningError::InvalidAnswer(2)));
    }

    #[test]
    fn chain_settings_are_checked() {
        let bad = MhSettings { steps: 150, burn_in: 100, proposal_sd: 0.1 };
        assert!(matches!(
            mh_posterior(&[], &PopulationModel::uniform(), &noise(1.0), &bad, 0),
            Err(LearningError::ChainTooShort { .. })
        ));
        let bad = MhSettings { steps: 500, burn_in: 100, proposal_sd: 0.0 };
        assert!(mh_posterior(&[], &PopulationModel::uniform(), &noise(1.0), &bad, 0).is_err());
        let prior = PopulationModel::point_mass(0.5).unwrap();
        assert_eq!(
            mh_posterior(&[], &prior, &noise(1.0), &MhSettings::default(), 0),
            Err(LearningError::PriorWithoutDensity)
        );
    }

    #[test]
    fn prior_recovery_without_observations() {
        let settings = MhSettings { steps: 10_000, burn_in: 1000, proposal_sd: 0.1 };
        let post = mh_posterior(&[], &PopulationModel::uniform(), &noise(0.5), &settings, 11).unwrap();
        assert_eq!(post.thetas.len(), 9000);
        assert!(post.thetas.iter().all(|t| (0.0..=1.0).contains(t)));
        assert_abs_diff_eq!(post.mean(), 0.5, epsilon = 0.02);
    }

    #[test]
    fn chains_are_deterministic() {
        let q = Query::from_pairs((40.0, 20.0), (70.0, 5.0)).unwrap();
        let obs = vec![Observation::new(3, q, 1).unwrap()];
        let run = |seed| {
            mh_posterior(&obs, &PopulationModel::uniform(), &noise(0.5), &MhSettings::default(), seed).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).thetas, run(6).thetas);
    }

    #[test]
    fn information_gain_examples() {
        let q = Query::from_pairs((50.0, 4.0), (55.0, 1.0)).unwrap();
        let n = noise(1e-3);
        let point = PosteriorSamples::from_thetas(vec![0.4; 50]);
        assert_eq!(expected_information_gain(&point, &q, &n), 0.0);

        let atoms = PosteriorSamples::from_thetas(vec![0.2, 0.8]);
        assert_abs_diff_eq!(expected_information_gain(&atoms, &q, &n), 1.0, epsilon = 1e-9);

        // Options tied for every theta carry no information.
        let tied = Query::from_pairs((50.0, 4.0), (50.0, 4.0 + 1e-13)).unwrap();
        let spread = PosteriorSamples::from_thetas((0..100).map(|i| i as f64 / 99.0).collect());
        assert_abs_diff_eq!(expected_information_gain(&spread, &tied, &noise(1.0)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn selection_examples() {
        let n = noise(0.5);
        let spread = PosteriorSamples::from_thetas((0..100).map(|i| i as f64 / 99.0).collect());
        let tied = Query::from_pairs((50.0, 4.0), (50.0, 4.0 + 1e-13)).unwrap();
        let separating = Query::from_pairs((50.0, 4.0), (55.0, 1.0)).unwrap();

        let one = [separating];
        assert_eq!(select_query(&spread, &one, &n).unwrap(), &separating);
        let both = [tied, separating];
        assert_eq!(select_query(&spread, &both, &n).unwrap(), &separating);
        let point = PosteriorSamples::from_thetas(vec![0.3]);
        assert_eq!(select_query(&point, &[separating, tied], &n).unwrap(), &separating);
        assert_eq!(select_query(&point, &[], &n), Err(LearningError::NoCandidates));
    }

    #[test]
    fn candidates_are_trade_offs_with_distinct_gaps() {
        let lat: Vec<f64> = (0..8).map(|i| 40.0 + 5.0 * i as f64).collect();
        let price: Vec<f64> = (0..8).map(|i| 5.0 * i as f64).collect();
        let cands = candidate_queries(&lat, &price);
        assert_eq!(cands.len(), 49);
        for q in &cands {
            assert!(q.a.ell < q.b.ell && q.a.price > q.b.price);
        }
        assert!(candidate_queries(&[40.0], &price).is_empty());
    }

    #[test]
    fn fit_population_examples() {
        assert_eq!(moment_match(0.5, 0.05), Some(PopulationModel::Beta { alpha: 2.0, beta: 2.0 }));
        // Below the floor the floor is used.
        let floored = moment_match(0.5, 1e-7).unwrap();
        assert_eq!(floored, moment_match(0.5, VARIANCE_FLOOR).unwrap());
        if let PopulationModel::Beta { alpha, beta } = floored {
            assert_abs_diff_eq!(alpha, 0.5 * 2499.0, epsilon = 1e-9);
            assert_abs_diff_eq!(beta, 0.5 * 2499.0, epsilon = 1e-9);
        }
        // Mass piled at both ends has variance too large for any Beta.
        let ends = PosteriorSamples::from_thetas(vec![0.0, 1.0, 0.0, 1.0]);
        assert!(matches!(fit_population(&[ends]).unwrap(), PopulationModel::Empirical { .. }));
        assert_eq!(fit_population(&[]), Err(LearningError::NoPosteriors));
    }

    #[test]
    fn learning_error_examples() {
        let menu = Menu::from_pairs(&[(50.0, 4.0), (70.0, 1.0)]).unwrap();
        let uni = PopulationModel::uniform();
        let pm = PopulationModel::point_mass(0.5).unwrap();
        assert_eq!(learning_error(&uni, &uni, &menu), 0.0);
        assert_abs_diff_eq!(learning_error(&pm, &uni, &menu), 3.0 / 23.0, epsilon = 1e-12);
        assert_eq!(learning_error(&pm, &uni, &menu), learning_error(&uni, &pm, &menu));
    }

    #[test]
    fn session_posterior_matches_direct_inference() {
        let lat: Vec<f64> = (0..8).map(|i| 40.0 + 5.0 * i as f64).collect();
        let price: Vec<f64> = (0..8).map(|i| 5.0 * i as f64).collect();
        let cands = candidate_queries(&lat, &price);
        let n = noise(0.5);
        let settings = MhSettings { steps: 1500, burn_in: 500, proposal_sd: 0.1 };
        let mut s = ElicitationSession::new(
            9,
            PopulationModel::uniform(),
            n,
            settings,
            &cands,
            QueryStrategy::Active,
            77,
        )
        .unwrap();
        for ans in [0, 1, 1, 0] {
            let q = s.next_query().unwrap();
            s.record(q, ans).unwrap();
        }
        let direct =
            infer_user(9, s.observations(), &PopulationModel::uniform(), &n, &settings, 77).unwrap();
        assert_eq!(s.posterior(), &direct);
    }
}
