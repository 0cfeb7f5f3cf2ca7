use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the infectious period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfectiousPeriod {
    Exponential {
        gamma: f64,
    },
    /// Deterministic duration. Only meaningful for the stochastic engine.
    Fixed {
        duration: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    /// Resampled uniformly from the given durations.
    Empirical {
        samples: Vec<f64>,
    },
}

impl InfectiousPeriod {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match self {
            InfectiousPeriod::Exponential { gamma } if !(gamma.is_finite() && *gamma > 0.0) => {
                bad("exponential infectious period needs gamma > 0")
            }
            InfectiousPeriod::Fixed { duration } if !(duration.is_finite() && *duration > 0.0) => {
                bad("fixed infectious period must be positive")
            }
            InfectiousPeriod::Gamma { shape, scale }
                if !(shape.is_finite() && scale.is_finite() && *shape > 0.0 && *scale > 0.0) =>
            {
                bad("gamma infectious period needs positive shape and scale")
            }
            InfectiousPeriod::Empirical { samples }
                if samples.is_empty() || samples.iter().any(|s| !(s.is_finite() && *s > 0.0)) =>
            {
                bad("empirical infectious periods must be a non-empty list of positive durations")
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InfectiousPeriod::Exponential { gamma } => Exp::new(*gamma).expect("validated").sample(rng),
            InfectiousPeriod::Fixed { duration } => *duration,
            InfectiousPeriod::Gamma { shape, scale } => Gamma::new(*shape, *scale).expect("validated").sample(rng),
            InfectiousPeriod::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            InfectiousPeriod::Exponential { gamma } => 1.0 / gamma,
            InfectiousPeriod::Fixed { duration } => *duration,
            InfectiousPeriod::Gamma { shape, scale } => shape * scale,
            InfectiousPeriod::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// Recovery rate when the law is exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            InfectiousPeriod::Exponential { gamma } => Some(*gamma),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    /// One-to-all contact rate of the general population.
    pub beta_g: f64,
    /// One-to-one contact rate within households.
    pub lambda_h: f64,
    /// One-to-one contact rate within workplaces.
    pub lambda_w: f64,
    pub period: InfectiousPeriod,
}

impl EpidemicParams {
    pub fn markovian(beta_g: f64, lambda_h: f64, lambda_w: f64, gamma: f64) -> Self {
        Self {
            beta_g,
            lambda_h,
            lambda_w,
            period: InfectiousPeriod::Exponential { gamma },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_g", self.beta_g),
            ("lambda_h", self.lambda_h),
            ("lambda_w", self.lambda_w),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        self.period.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(EpidemicParams::markovian(0.1, 0.2, 0.3, 0.125).validate().is_ok());
        assert!(EpidemicParams::markovian(-0.1, 0.2, 0.3, 0.125).validate().is_err());
        assert!(EpidemicParams::markovian(0.1, 0.2, 0.3, 0.0).validate().is_err());
        assert!(InfectiousPeriod::Fixed { duration: 0.0 }.validate().is_err());
        assert!(InfectiousPeriod::Empirical { samples: vec![] }.validate().is_err());
        assert!(InfectiousPeriod::Gamma { shape: 2.0, scale: 1.5 }.validate().is_ok());
    }

    #[test]
    fn serde_tagging() {
        let p: InfectiousPeriod = toml::from_str("kind = \"exponential\"\ngamma = 0.125\n").unwrap();
        assert_eq!(p.exponential_rate(), Some(0.125));
        let p: InfectiousPeriod = toml::from_str("kind = \"fixed\"\nduration = 3.0\n").unwrap();
        assert_eq!(p.mean(), 3.0);
    }
}
