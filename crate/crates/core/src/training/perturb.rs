use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::network::Mlp;
use crate::problems::ProblemSpec;
use crate::sampling::SamplePoint;

use super::loss::LossEvaluator;

/// Domain closure along coordinate `i` (time last).
fn coord_bounds(problem: &ProblemSpec, i: usize) -> (f64, f64) {
    if i < problem.d {
        problem.domain.bounds(i)
    } else {
        (0.0, problem.domain.t_max)
    }
}

/// Coordinates the perturbation may move: the point's free coordinates,
/// minus time when `perturb_time` is off.
fn movable(point: &SamplePoint, perturb_time: bool) -> Vec<bool> {
    let mut mask = point.free_mask();
    if !perturb_time {
        *mask.last_mut().unwrap() = false;
    }
    mask
}

/// Adds `N(0, sigma^2)` noise to each movable coordinate, clamps to the
/// domain closure and recomputes the label.
pub fn gaussian_perturb(
    problem: &ProblemSpec,
    point: &SamplePoint,
    sigma: f64,
    perturb_time: bool,
    rng: &mut impl Rng,
) -> SamplePoint {
    if sigma == 0.0 {
        return point.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and >= 0");
    let mut out = point.clone();
    for (i, free) in movable(point, perturb_time).into_iter().enumerate() {
        if free {
            let (lo, hi) = coord_bounds(problem, i);
            out.set_coord(i, (point.coord(i) + noise.sample(rng)).clamp(lo, hi));
        }
    }
    out.relabel(problem);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdSettings {
    pub epsilon: f64,
    pub alpha: f64,
    pub steps: usize,
    pub perturb_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub point: SamplePoint,
    /// Final offset from the clean point, per coordinate (time last).
    pub delta: Vec<f64>,
    /// Whether the domain clamp cut any step short.
    pub clamped: bool,
    /// Whether the attack was abandoned on a non-finite gradient.
    pub aborted: bool,
}

/// Sign-gradient ascent of the pointwise loss within the box
/// `|delta_i| <= epsilon`, starting from `delta = 0`. Each step recomputes
/// labels (and, through the residual, forcing) at the moved coordinates.
pub fn pgd_attack(
    ev: &mut LossEvaluator,
    problem: &ProblemSpec,
    net: &Mlp,
    point: &SamplePoint,
    cfg: &PgdSettings,
) -> Result<PgdOutcome> {
    let n = point.x.len() + 1;
    let clean = PgdOutcome {
        point: point.clone(),
        delta: vec![0.0; n],
        clamped: false,
        aborted: false,
    };
    if cfg.epsilon == 0.0 {
        return Ok(clean);
    }
    let mask = movable(point, cfg.perturb_time);
    let mut delta = vec![0.0; n];
    let mut current = point.clone();
    let mut clamped = false;
    for _ in 0..cfg.steps {
        let grad = match ev.input_gradient(problem, net, &current) {
            Ok((_, g)) if g.iter().all(|v| v.is_finite()) => g,
            Ok(_) | Err(_) => {
                log::warn!(
                    "non-finite input gradient at {:?}, t={}; keeping the clean point",
                    point.x,
                    point.t
                );
                return Ok(PgdOutcome {
                    aborted: true,
                    ..clean
                });
            }
        };
        for i in 0..n {
            if !mask[i] {
                continue;
            }
            let step = cfg.alpha * sign(grad[i]);
            let want = (delta[i] + step).clamp(-cfg.epsilon, cfg.epsilon);
            let (lo, hi) = coord_bounds(problem, i);
            let c = point.coord(i);
            let mut moved = (c + want).clamp(lo, hi);
            if moved != c + want {
                clamped = true;
            }
            // Rounding in c + want can overshoot the box by an ulp.
            while (moved - c).abs() > cfg.epsilon {
                moved = if moved > c { moved.next_down() } else { moved.next_up() };
            }
            delta[i] = moved - c;
            current.set_coord(i, moved);
        }
    }
    current.relabel(problem);
    Ok(PgdOutcome {
        point: current,
        delta,
        clamped,
        aborted: false,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
