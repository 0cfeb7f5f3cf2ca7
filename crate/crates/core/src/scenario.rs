//! Scenario files: one TOML document per parameter set.
//!
//! ```toml
//! name = "g40-h40-w20-r2.5"
//! population = 10000
//! beta_g = 0.125
//! lambda_h = 1.5
//! lambda_w = 0.00115
//! epsilon = 0.005        # or: single_seed = true
//! horizon = 55.0         # or: horizon = "auto"
//! replicates = 50
//! seed = 1
//!
//! [period]
//! kind = "exponential"
//! gamma = 0.125
//!
//! [households]           # optional, defaults to the shipped distribution
//! 1 = 0.3
//! 2 = 0.7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{EpidemicParams, InfectiousPeriod, SamplingOptions};
use crate::ensemble::{EnsembleSetup, Seeding};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::reduced::{ReducedModel, ReducedParams};
use crate::size_dist::{default_households, default_workplaces, SizeDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Time(f64),
    Auto(AutoKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub population: usize,
    pub beta_g: f64,
    pub lambda_h: f64,
    pub lambda_w: f64,
    pub period: InfectiousPeriod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub single_seed: bool,
    pub horizon: Horizon,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Spacing of the output grid.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Free-form label, e.g. the reproduction number of a table entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_households")]
    pub households: SizeDistribution,
    #[serde(default = "default_workplaces")]
    pub workplaces: SizeDistribution,
}

fn default_replicates() -> usize {
    1
}

fn default_dt() -> f64 {
    1.0
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.population == 0 {
            return bad("population must be >= 1".into());
        }
        match (self.epsilon, self.single_seed) {
            (Some(_), true) => return bad("set either epsilon or single_seed, not both".into()),
            (None, false) => return bad("one of epsilon or single_seed is required".into()),
            (Some(e), false) if !(0.0..=1.0).contains(&e) => {
                return bad(format!("epsilon must lie in [0, 1], got {e}"))
            }
            _ => {}
        }
        if let Horizon::Time(t) = self.horizon {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("horizon must be a finite time >= 0, got {t}"));
            }
        }
        if !(self.dt > 0.0) {
            return bad("dt must be > 0".into());
        }
        self.epidemic_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn epidemic_params(&self) -> EpidemicParams {
        EpidemicParams {
            beta_g: self.beta_g,
            lambda_h: self.lambda_h,
            lambda_w: self.lambda_w,
            period: self.period.clone(),
        }
    }

    /// Initial infected fraction; a single seed counts as `1/K`.
    pub fn initial_fraction(&self) -> f64 {
        self.epsilon.unwrap_or(1.0 / self.population as f64)
    }

    pub fn seeding(&self) -> Seeding {
        match self.epsilon {
            Some(e) if !self.single_seed => Seeding::Fraction(e),
            _ => Seeding::Single,
        }
    }

    /// Parameters of the large-population ODE. The limit only exists for
    /// exponentially distributed infectious periods.
    pub fn reduced_params(&self) -> Result<ReducedParams> {
        let gamma = self.period.exponential_rate().ok_or_else(|| {
            Error::Config("the reduced model requires exponentially distributed infectious periods".into())
        })?;
        Ok(ReducedParams {
            beta_g: self.beta_g,
            lambda_h: self.lambda_h,
            lambda_w: self.lambda_w,
            gamma,
            households: self.households.clone(),
            workplaces: self.workplaces.clone(),
        })
    }

    pub fn ensemble_setup(&self) -> EnsembleSetup {
        EnsembleSetup {
            population: self.population,
            households: self.households.clone(),
            workplaces: self.workplaces.clone(),
            params: self.epidemic_params(),
            seeding: self.seeding(),
            markovian: self.period.exponential_rate().is_some(),
        }
    }

    pub fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            dt: self.dt,
            ..Default::default()
        }
    }

    /// The time horizon, solving the reduced model for `horizon = "auto"`.
    pub fn resolve_horizon(&self) -> Result<f64> {
        match self.horizon {
            Horizon::Time(t) => Ok(t),
            Horizon::Auto(_) => auto_horizon(&self.reduced_params()?, self.initial_fraction(), 0.01),
        }
    }

    /// The ten parameter sets of the benchmark ladder: two layer splits
    /// (`p_G, p_H, p_W`) times five reproduction numbers.
    pub fn table1() -> Vec<Scenario> {
        const R0: [&str; 5] = ["1.2", "1.4", "1.7", "2.0", "2.5"];
        let ladders = [
            (
                "g20-h40-w40",
                [0.03, 0.035, 0.045, 0.05, 0.06],
                [0.05, 0.07, 0.09, 0.15, 0.2],
                [0.0015, 0.0016, 0.0018, 0.002, 0.0022],
                [130.0, 130.0, 105.0, 85.0, 75.0],
            ),
            (
                "g40-h40-w20",
                [0.06, 0.07, 0.085, 0.1, 0.125],
                [0.06, 0.07, 0.1, 0.15, 1.5],
                [0.00075, 0.0008, 0.001, 0.0011, 0.00115],
                [145.0, 130.0, 95.0, 80.0, 55.0],
            ),
        ];
        let mut out = Vec::new();
        for (split, beta, lh, lw, horizon) in ladders {
            for k in 0..5 {
                out.push(Scenario {
                    name: format!("{split}-r{}", R0[k]),
                    population: 10_000,
                    beta_g: beta[k],
                    lambda_h: lh[k],
                    lambda_w: lw[k],
                    period: InfectiousPeriod::Exponential { gamma: 0.125 },
                    epsilon: Some(0.005),
                    single_seed: false,
                    horizon: Horizon::Time(horizon[k]),
                    replicates: 50,
                    seed: 1,
                    dt: 1.0,
                    label: Some(format!("R0 = {}", R0[k])),
                    households: default_households(),
                    workplaces: default_workplaces(),
                });
            }
        }
        out
    }
}

/// Post-peak time at which the infected proportion of the reduced model
/// falls below `level`, rounded down to a multiple of five.
pub fn auto_horizon(params: &ReducedParams, epsilon: f64, level: f64) -> Result<f64> {
    let t_star = threshold_time(params, epsilon, level)?;
    Ok(round_down_to_five(t_star))
}

/// Unrounded post-peak threshold time of the reduced model, searched up to
/// `t = 2000`.
pub fn threshold_time(params: &ReducedParams, epsilon: f64, level: f64) -> Result<f64> {
    let model = ReducedModel::new(params.clone())?;
    let y0 = model.initial_condition(epsilon)?;
    let sol = model.solve(&y0, 2000.0, &IntegratorConfig::default())?;
    sol.threshold_time(level).ok_or_else(|| {
        Error::Config(format!(
            "the infected proportion never falls below {level} after its peak; set the horizon explicitly"
        ))
    })
}

pub fn round_down_to_five(t: f64) -> f64 {
    (t / 5.0).floor() * 5.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
population = 100
beta_g = 0.1
lambda_h = 0.2
lambda_w = 0.01
epsilon = 0.01
horizon = 30.0

[period]
kind = "exponential"
gamma = 0.125

[households]
2 = 1.0
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.replicates, 1);
        assert_eq!(s.households.n_max(), 2);
        assert_eq!(s.workplaces, default_workplaces());
        assert_eq!(s.seeding(), Seeding::Fraction(0.01));
        assert_eq!(s.resolve_horizon().unwrap(), 30.0);
    }

    #[test]
    fn round_trip() {
        for s in Scenario::table1() {
            let back = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = MINIMAL.replace("beta_g = 0.1", "beta_g = oops");
        let Err(Error::Config(msg)) = Scenario::from_toml(&text) else {
            panic!("expected a config error");
        };
        assert!(msg.contains("line 4"), "{msg}");
        let text = MINIMAL.replace("epsilon = 0.01", "single_seed = true\nepsilon = 0.01");
        assert!(matches!(Scenario::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("population = 100", "population = 100\ncolour = 3");
        assert!(matches!(Scenario::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("gamma = 0.125", "gamma = 0.125\ncolour = 3");
        assert!(matches!(Scenario::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn table_entries() {
        let all = Scenario::table1();
        assert_eq!(all.len(), 10);
        let a = all.iter().find(|s| s.name == "g20-h40-w40-r2.5").unwrap();
        assert_eq!((a.beta_g, a.lambda_h, a.lambda_w), (0.06, 0.2, 0.0022));
        assert_eq!(a.horizon, Horizon::Time(75.0));
        let b = all.iter().find(|s| s.name == "g40-h40-w20-r2.5").unwrap();
        assert_eq!((b.beta_g, b.lambda_h, b.lambda_w), (0.125, 1.5, 0.00115));
        assert_eq!(b.horizon, Horizon::Time(55.0));
    }

    #[test]
    fn non_exponential_periods_have_no_reduced_model() {
        let text = MINIMAL.replace(
            "kind = \"exponential\"\ngamma = 0.125",
            "kind = \"fixed\"\nduration = 8.0",
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert!(matches!(s.reduced_params(), Err(Error::Config(_))));
        assert!(!s.ensemble_setup().markovian);
    }

    #[test]
    fn rounding() {
        assert_eq!(round_down_to_five(57.9), 55.0);
        assert_eq!(round_down_to_five(60.0), 60.0);
        assert_eq!(round_down_to_five(4.99), 0.0);
    }
}
