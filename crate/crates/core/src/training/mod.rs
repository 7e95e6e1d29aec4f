//! Losses, Adam, Gaussian smoothing, PGD, and the full-batch training loop.

mod adam;
mod config;
mod loss;
mod perturb;

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::AdamState;
pub use config::{LossWeights, Regime, TestMetric, TrainConfig};
pub use loss::{composite_loss, evaluate, pointwise_loss, LossBreakdown, LossEvaluator, Labels};
pub use perturb::{gaussian_perturb, pgd_attack, PgdOutcome, PgdSettings};

use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::problems::ProblemSpec;
use crate::sampling::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    /// Present every `eval_interval` epochs and at the last epoch.
    pub test_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: Vec<EpochRecord>,
    pub epochs_completed: usize,
    /// Composite loss of the final network on the clean training set.
    pub final_train: LossBreakdown,
    pub final_test: f64,
    pub wall_time_secs: f64,
    pub diverged: bool,
    pub divergence_reason: Option<String>,
}

impl RunMetrics {
    pub const CSV_HEADER: &'static str =
        "epoch,residual_mse,boundary_mse,initial_mse,wd_penalty,total,test_mse";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let l = &r.loss;
            write!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},",
                r.epoch, l.residual_mse, l.boundary_mse, l.initial_mse, l.wd_penalty, l.total
            )
            .unwrap();
            if let Some(t) = r.test_mse {
                write!(out, "{t:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// The configured test metric for `net` on `test`.
pub fn test_metric(
    ev: &mut LossEvaluator,
    problem: &ProblemSpec,
    net: &Mlp,
    test: &SampleSet,
    config: &TrainConfig,
) -> Result<f64> {
    match config.test_metric {
        TestMetric::ExactMse => Ok(evaluate(net, test)),
        TestMetric::HeldOutComposite => {
            Ok(ev.composite(problem, net, test, 0.0, config.weights, None)?.total)
        }
    }
}

fn is_numerical_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFiniteValue { .. }
            | Error::NonFiniteAdjoint { .. }
            | Error::NonFiniteGradient { .. }
            | Error::NonFiniteLeaf { .. }
            | Error::DivisionByZero { .. }
    )
}

/// The epoch's training set: the clean points transformed per regime.
fn epoch_set(
    ev: &mut LossEvaluator,
    problem: &ProblemSpec,
    net: &Mlp,
    clean: &SampleSet,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<SampleSet>> {
    let points = match config.regime {
        Regime::Pinn | Regime::PinnWd => return Ok(None),
        Regime::Gaussian => {
            if config.sigma == 0.0 {
                return Ok(None);
            }
            clean
                .points
                .iter()
                .map(|p| gaussian_perturb(problem, p, config.sigma, config.perturb_time, rng))
                .collect()
        }
        Regime::Piat | Regime::PiatWd => {
            if config.epsilon == 0.0 {
                return Ok(None);
            }
            let pgd = PgdSettings {
                epsilon: config.epsilon,
                alpha: config.alpha(),
                steps: config.pgd_steps,
                perturb_time: config.perturb_time,
            };
            let mut out = Vec::with_capacity(clean.points.len());
            for p in &clean.points {
                out.push(pgd_attack(ev, problem, net, p, &pgd)?.point);
            }
            out
        }
    };
    Ok(Some(SampleSet {
        points,
        seed: clean.seed,
    }))
}

/// Full-batch training of `net` on `train`.
///
/// Each epoch transforms the clean points per regime (fresh noise or a fresh
/// attack every epoch), takes the composite loss and its gradient on the
/// result, and applies one Adam step. A loss above the divergence threshold
/// or a numerical failure stops the run with `diverged` set and the last
/// finite parameters kept.
pub fn train(
    problem: &ProblemSpec,
    mut net: Mlp,
    train: &SampleSet,
    test: &SampleSet,
    config: &TrainConfig,
) -> Result<(Mlp, RunMetrics)> {
    config.validate()?;
    problem.validate()?;
    let start = Instant::now();
    let mut ev = LossEvaluator::new();
    let mut adam = AdamState::new(net.param_count(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grad = vec![0.0; net.param_count()];
    let mut records = Vec::with_capacity(config.epochs);
    let mut divergence_reason = None;
    let mut epochs_completed = 0;
    let lambda = config.lambda();

    for epoch in 0..config.epochs {
        let step = (|| -> Result<LossBreakdown> {
            let set = epoch_set(&mut ev, problem, &net, train, config, &mut rng)?;
            let set = set.as_ref().unwrap_or(train);
            ev.composite(problem, &net, set, lambda, config.weights, Some(&mut grad))
        })();
        let loss = match step {
            Ok(l) => l,
            Err(e) if is_numerical_failure(&e) => {
                divergence_reason = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() || loss.total > config.divergence_threshold {
            divergence_reason = Some(format!("epoch {epoch}: total loss {:e}", loss.total));
            records.push(EpochRecord {
                epoch,
                loss,
                test_mse: None,
            });
            break;
        }
        let mut params = net.params().to_vec();
        if let Err(e) = adam.step(&mut params, &grad) {
            divergence_reason = Some(format!("epoch {epoch}: {e}"));
            break;
        }
        net.params_mut().copy_from_slice(&params);
        epochs_completed += 1;

        let last = epoch + 1 == config.epochs;
        let test_mse = if (epoch + 1) % config.eval_interval == 0 || last {
            let t = test_metric(&mut ev, problem, &net, test, config)?;
            log::info!(
                "{} epoch {}: loss {:.3e} test {:.3e}",
                config.regime,
                epoch + 1,
                loss.total,
                t
            );
            Some(t)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            loss,
            test_mse,
        });
    }

    let diverged = divergence_reason.is_some();
    if let Some(reason) = &divergence_reason {
        log::warn!("{} diverged at {reason}", config.regime);
    }
    let final_train = match ev.composite(problem, &net, train, lambda, config.weights, None) {
        Ok(l) => l,
        Err(e) if is_numerical_failure(&e) => LossBreakdown {
            total: f64::NAN,
            ..Default::default()
        },
        Err(e) => return Err(e),
    };
    let final_test = test_metric(&mut ev, problem, &net, test, config).unwrap_or(f64::NAN);
    let metrics = RunMetrics {
        epochs_completed,
        records,
        final_train,
        final_test,
        wall_time_secs: start.elapsed().as_secs_f64(),
        diverged,
        divergence_reason,
    };
    Ok((net, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_problem;

    fn small_setup() -> (ProblemSpec, Mlp, SampleSet, SampleSet) {
        let ks = ProblemSpec::kuramoto_sivashinsky(0.5);
        let net = Mlp::init(&[2, 8, 8, 1], 3).unwrap();
        let (train, test) = sample_problem(&ks, 20, 6, 30, 1, 2);
        (ks, net, train, test)
    }

    fn bits(net: &Mlp) -> Vec<u64> {
        net.params().iter().map(|p| p.to_bits()).collect()
    }

    fn run(regime: Regime, f: impl FnOnce(&mut TrainConfig)) -> (Mlp, RunMetrics) {
        let (ks, net, train, test) = small_setup();
        let mut cfg = TrainConfig {
            regime,
            epochs: 30,
            eval_interval: 10,
            ..Default::default()
        };
        f(&mut cfg);
        super::train(&ks, net, &train, &test, &cfg).unwrap()
    }

    #[test]
    fn zero_budget_regimes_match_pinn_bitwise() {
        let (pinn, mp) = run(Regime::Pinn, |_| {});
        let (piat, ma) = run(Regime::Piat, |c| c.epsilon = 0.0);
        let (gauss, mg) = run(Regime::Gaussian, |c| c.sigma = 0.0);
        assert_eq!(bits(&pinn), bits(&piat));
        assert_eq!(bits(&pinn), bits(&gauss));
        let strip = |m: &RunMetrics| m.records.clone();
        assert_eq!(strip(&mp), strip(&ma));
        assert_eq!(strip(&mp), strip(&mg));
    }

    #[test]
    fn training_reduces_loss_and_is_reproducible() {
        let (a, m) = run(Regime::Pinn, |c| c.epochs = 200);
        let first = m.records.first().unwrap().loss.total;
        assert!(m.final_train.total < first);
        let (b, _) = run(Regime::Pinn, |c| c.epochs = 200);
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(m.epochs_completed, 200);
        let tests: Vec<usize> = m
            .records
            .iter()
            .filter(|r| r.test_mse.is_some())
            .map(|r| r.epoch)
            .collect();
        assert_eq!(tests.len(), 20);
        assert_eq!(*tests.last().unwrap(), 199);
    }

    #[test]
    fn perturbing_regimes_differ_from_pinn() {
        let (pinn, _) = run(Regime::Pinn, |_| {});
        let (piat, _) = run(Regime::Piat, |c| c.pgd_steps = 2);
        let (gauss, _) = run(Regime::Gaussian, |_| {});
        let (wd, mwd) = run(Regime::PinnWd, |_| {});
        assert_ne!(bits(&pinn), bits(&piat));
        assert_ne!(bits(&pinn), bits(&gauss));
        assert_ne!(bits(&pinn), bits(&wd));
        assert!(mwd.records[0].loss.wd_penalty > 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let (_, m) = run(Regime::Pinn, |c| c.divergence_threshold = 1e-9);
        assert!(m.diverged);
        assert_eq!(m.records.len(), 1);
        assert!(m.divergence_reason.unwrap().contains("epoch 0"));
    }

    #[test]
    fn metrics_csv() {
        let (_, m) = run(Regime::Pinn, |c| c.epochs = 12);
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RunMetrics::CSV_HEADER);
        assert_eq!(lines.len(), 13);
        assert!(lines[1].ends_with(','));
        assert!(!lines[10].ends_with(','));
        assert_eq!(lines[10].split(',').count(), 7);
    }
}
