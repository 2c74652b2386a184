//! Distributions over the price weight `theta` across service users.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopulationError {
    #[error("beta parameters must be finite and > 0, got ({alpha}, {beta})")]
    InvalidBeta { alpha: f64, beta: f64 },
    #[error("empirical population needs at least one sample")]
    EmptySamples,
    #[error("sample {0} lies outside [0, 1]")]
    SampleOutOfRange(f64),
}

/// Population-level distribution of `theta` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationModel {
    Beta { alpha: f64, beta: f64 },
    Empirical { samples: Vec<f64> },
}

impl PopulationModel {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self, PopulationError> {
        let model = Self::Beta { alpha, beta };
        model.validate()?;
        Ok(model)
    }

    pub fn uniform() -> Self {
        Self::Beta {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Homogeneous population: every user has the same `theta`.
    pub fn point_mass(theta: f64) -> Result<Self, PopulationError> {
        Self::empirical(vec![theta])
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self, PopulationError> {
        let model = Self::Empirical { samples };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        match self {
            Self::Beta { alpha, beta } => {
                let ok = |x: f64| x.is_finite() && x > 0.0;
                if ok(*alpha) && ok(*beta) {
                    Ok(())
                } else {
                    Err(PopulationError::InvalidBeta {
                        alpha: *alpha,
                        beta: *beta,
                    })
                }
            }
            Self::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(PopulationError::EmptySamples);
                }
                match samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                    Some(&bad) => Err(PopulationError::SampleOutOfRange(bad)),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// `P(theta <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return match self {
                Self::Beta { .. } => 0.0,
                Self::Empirical { samples } => {
                    samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64
                }
            };
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            Self::Beta { alpha, beta } => beta_reg(*alpha, *beta, x),
            Self::Empirical { samples } => {
                samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// Log density; `None` for empirical sample sets, which have no density.
    pub fn ln_pdf(&self, x: f64) -> Option<f64> {
        match self {
            Self::Beta { alpha, beta } => {
                if !(0.0..=1.0).contains(&x) {
                    return Some(f64::NEG_INFINITY);
                }
                let lx = if *alpha == 1.0 { 0.0 } else { (alpha - 1.0) * x.ln() };
                let l1x = if *beta == 1.0 { 0.0 } else { (beta - 1.0) * (1.0 - x).ln() };
                Some(lx + l1x - ln_beta(*alpha, *beta))
            }
            Self::Empirical { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Beta { alpha, beta } => {
                // Parameters are validated at construction.
                let dist = Beta::new(*alpha, *beta).expect("valid beta parameters");
                dist.sample(rng).clamp(0.0, 1.0)
            }
            Self::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn beta_cdf_matches_polynomial_form() {
        // Beta(2,2) cdf is 3x^2 - 2x^3.
        let m = PopulationModel::beta(2.0, 2.0).unwrap();
        for x in [0.1, 0.25, 0.5, 0.87] {
            assert_abs_diff_eq!(m.cdf(x), 3.0 * x * x - 2.0 * x * x * x, epsilon = 1e-12);
        }
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(1.0), 1.0);
    }

    #[test]
    fn ln_pdf_integrates_to_one() {
        let m = PopulationModel::beta(2.5, 1.5).unwrap();
        let n = 20_000;
        let total: f64 = (0..n)
            .map(|i| (i as f64 + 0.5) / n as f64)
            .map(|x| m.ln_pdf(x).unwrap().exp() / n as f64)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-4);
        assert!(PopulationModel::point_mass(0.3).unwrap().ln_pdf(0.3).is_none());
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(PopulationModel::beta(0.0, 1.0).is_err());
        assert!(PopulationModel::empirical(vec![]).is_err());
        assert!(PopulationModel::empirical(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn serde_tagging() {
        let json = serde_json::to_string(&PopulationModel::uniform()).unwrap();
        assert_eq!(json, r#"{"beta":{"alpha":1.0,"beta":1.0}}"#);
        let back: PopulationModel = serde_json::from_str(r#"{"empirical":{"samples":[0.5]}}"#).unwrap();
        assert_eq!(back, PopulationModel::point_mass(0.5).unwrap());
    }
}
