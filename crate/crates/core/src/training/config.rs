use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "pinn")]
    Pinn,
    #[serde(rename = "pinn+wd")]
    PinnWd,
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "piat")]
    Piat,
    #[serde(rename = "piat+wd")]
    PiatWd,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Pinn,
        Regime::PinnWd,
        Regime::Gaussian,
        Regime::Piat,
        Regime::PiatWd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Pinn => "pinn",
            Regime::PinnWd => "pinn+wd",
            Regime::Gaussian => "gaussian",
            Regime::Piat => "piat",
            Regime::PiatWd => "piat+wd",
        }
    }

    pub fn uses_weight_decay(self) -> bool {
        matches!(self, Regime::PinnWd | Regime::PiatWd)
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, Regime::Piat | Regime::PiatWd)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Regime> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], "+");
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

/// What `test_mse` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMetric {
    /// MSE of the network against the exact solution on test points.
    #[default]
    ExactMse,
    /// Composite PDE loss (no weight decay) on a held-out point set.
    HeldOutComposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub residual: f64,
    pub boundary: f64,
    pub initial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            residual: 1.0,
            boundary: 1.0,
            initial: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub regime: Regime,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Applied only by the `+wd` regimes.
    pub weight_decay: f64,
    pub epsilon: f64,
    pub pgd_steps: usize,
    /// `None` means `epsilon / 4`.
    pub pgd_alpha: Option<f64>,
    pub sigma: f64,
    /// Whether perturbations move t as well as x.
    pub perturb_time: bool,
    /// Seeds the Gaussian-smoothing noise.
    pub seed: u64,
    pub weights: LossWeights,
    pub eval_interval: usize,
    pub test_metric: TestMetric,
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Pinn,
            epochs: 10_000,
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            epsilon: 0.05,
            pgd_steps: 10,
            pgd_alpha: None,
            sigma: 0.05,
            perturb_time: true,
            seed: 0,
            weights: LossWeights::default(),
            eval_interval: 100,
            test_metric: TestMetric::ExactMse,
            divergence_threshold: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn alpha(&self) -> f64 {
        self.pgd_alpha.unwrap_or(self.epsilon / 4.0)
    }

    /// The weight-decay coefficient in effect for the configured regime.
    pub fn lambda(&self) -> f64 {
        if self.regime.uses_weight_decay() {
            self.weight_decay
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be >= 0");
        }
        if !(self.sigma >= 0.0) {
            return bad("sigma must be >= 0");
        }
        if self.regime.is_adversarial() {
            if self.pgd_steps == 0 {
                return bad("pgd_steps must be >= 1");
            }
            if self.epsilon > 0.0 && !(self.alpha() > 0.0) {
                return bad("pgd_alpha must be > 0");
            }
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be >= 1");
        }
        let w = self.weights;
        if [w.residual, w.boundary, w.initial].iter().any(|v| !(*v >= 0.0)) {
            return bad("loss weights must be >= 0");
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("divergence_threshold must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_names_round_trip() {
        for r in Regime::ALL {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.name()));
        }
        assert_eq!("PIAT_WD".parse::<Regime>().unwrap(), Regime::PiatWd);
        assert!("adv".parse::<Regime>().is_err());
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.alpha(), 0.0125);
        assert_eq!(c.lambda(), 0.0);
        let wd = TrainConfig {
            regime: Regime::PiatWd,
            ..c
        };
        assert_eq!(wd.lambda(), 5e-4);
        assert!(wd.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let c = TrainConfig {
            epsilon: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            regime: Regime::Piat,
            pgd_steps: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epohcs": 3}"#).is_err());
    }
}
