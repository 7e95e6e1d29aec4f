use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::problems::{field_value, ExactField, NetField, PointVars, ProblemSpec};
use crate::sampling::{PointKind, SamplePoint, SampleSet};
use crate::tape::{Tape, Var};

use super::config::LossWeights;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub residual_mse: f64,
    pub boundary_mse: f64,
    pub initial_mse: f64,
    pub wd_penalty: f64,
    pub total: f64,
}

/// Where a boundary or initial label comes from when building a pointwise loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labels {
    /// The stored `SamplePoint::label`, as a tape constant.
    Stored,
    /// `g` or `h` rebuilt on the tape from the point coordinates, so the loss
    /// is differentiable through the label.
    OnTape,
}

/// Pointwise loss of one point on `tape`: squared residual for collocation
/// points, squared data misfit otherwise.
pub fn pointwise_loss(
    tape: &mut Tape,
    problem: &ProblemSpec,
    net: &Mlp,
    leaves: &[Var],
    point: &SamplePoint,
    vars: &PointVars,
    labels: Labels,
) -> Result<Var> {
    let field = NetField { net, leaves };
    let err = match point.kind {
        PointKind::Collocation => problem.network_residual(tape, &field, vars)?,
        PointKind::Boundary { .. } | PointKind::Initial | PointKind::Test => {
            let u = field_value(tape, &field, vars)?;
            let y = match labels {
                Labels::Stored => tape.constant(point.label),
                Labels::OnTape => field_value(tape, &ExactField(problem), vars)?,
            };
            tape.sub(u, y)
        }
    };
    Ok(tape.mul(err, err))
}

fn kind_slot(kind: &PointKind) -> Result<usize> {
    match kind {
        PointKind::Collocation => Ok(0),
        PointKind::Boundary { .. } => Ok(1),
        PointKind::Initial => Ok(2),
        PointKind::Test => Err(Error::Config(
            "test points cannot enter the training loss".into(),
        )),
    }
}

/// Reusable buffers for loss and gradient evaluation.
#[derive(Debug, Default)]
pub struct LossEvaluator {
    tape: Tape,
    adjoints: Vec<f64>,
}

impl LossEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Composite loss over `set` plus `lambda * |theta|^2`, and its gradient
    /// with respect to the parameters when `grad` is given.
    ///
    /// Per-point gradients are summed in point order, so the result does not
    /// depend on anything but the inputs.
    pub fn composite(
        &mut self,
        problem: &ProblemSpec,
        net: &Mlp,
        set: &SampleSet,
        lambda: f64,
        weights: LossWeights,
        mut grad: Option<&mut [f64]>,
    ) -> Result<LossBreakdown> {
        let mut counts = [0usize; 3];
        for p in &set.points {
            counts[kind_slot(&p.kind)?] += 1;
        }
        let w = [weights.residual, weights.boundary, weights.initial];
        for (slot, name) in ["collocation", "boundary", "initial"].into_iter().enumerate() {
            if counts[slot] == 0 && w[slot] != 0.0 {
                return Err(Error::EmptyKind(name));
            }
        }

        let n_params = net.param_count();
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != n_params {
                return Err(Error::ParamLength {
                    expected: n_params,
                    got: g.len(),
                });
            }
            g.fill(0.0);
        }

        let mut sums = [0.0f64; 3];
        for p in &set.points {
            let slot = kind_slot(&p.kind)?;
            let scale = w[slot] / counts[slot] as f64;
            if scale == 0.0 {
                continue;
            }
            let tape = &mut self.tape;
            tape.clear();
            let leaves = net.record_params(tape)?;
            let vars = PointVars::record(tape, &p.x, p.t)?;
            let loss = pointwise_loss(tape, problem, net, &leaves, p, &vars, Labels::Stored)?;
            sums[slot] += tape.value(loss);
            if let Some(g) = grad.as_deref_mut() {
                tape.backward_into(loss, &mut self.adjoints)?;
                // Parameter leaves are the first `n_params` tape nodes.
                for (gi, a) in g.iter_mut().zip(&self.adjoints[..n_params]) {
                    *gi += scale * a;
                }
            }
        }

        let mean = |slot: usize| {
            if counts[slot] == 0 {
                0.0
            } else {
                sums[slot] / counts[slot] as f64
            }
        };
        let wd_penalty = lambda * net.squared_norm();
        if let Some(g) = grad {
            if lambda != 0.0 {
                for (gi, p) in g.iter_mut().zip(net.params()) {
                    *gi += 2.0 * lambda * p;
                }
            }
        }
        let (r, b, i) = (mean(0), mean(1), mean(2));
        Ok(LossBreakdown {
            residual_mse: r,
            boundary_mse: b,
            initial_mse: i,
            wd_penalty,
            total: w[0] * r + w[1] * b + w[2] * i + wd_penalty,
        })
    }

    /// Pointwise loss of a single point (stored labels).
    pub fn point_loss(&mut self, problem: &ProblemSpec, net: &Mlp, point: &SamplePoint) -> Result<f64> {
        let tape = &mut self.tape;
        tape.clear();
        let leaves: Vec<Var> = net.params().iter().map(|&p| tape.constant(p)).collect();
        let vars = PointVars::record(tape, &point.x, point.t)?;
        let loss = pointwise_loss(tape, problem, net, &leaves, point, &vars, Labels::Stored)?;
        Ok(tape.value(loss))
    }

    /// Pointwise loss and its gradient with respect to the `d + 1`
    /// coordinates (time last), with labels and forcing on the tape.
    pub fn input_gradient(
        &mut self,
        problem: &ProblemSpec,
        net: &Mlp,
        point: &SamplePoint,
    ) -> Result<(f64, Vec<f64>)> {
        let tape = &mut self.tape;
        tape.clear();
        let leaves: Vec<Var> = net.params().iter().map(|&p| tape.constant(p)).collect();
        let vars = PointVars::record(tape, &point.x, point.t)?;
        let loss = pointwise_loss(tape, problem, net, &leaves, point, &vars, Labels::OnTape)?;
        tape.backward_into(loss, &mut self.adjoints)?;
        let grad = vars
            .x
            .iter()
            .chain(std::iter::once(&vars.t))
            .map(|v| self.adjoints[v.index()])
            .collect();
        Ok((tape.value(loss), grad))
    }
}

/// Composite loss without gradient.
pub fn composite_loss(
    problem: &ProblemSpec,
    net: &Mlp,
    set: &SampleSet,
    lambda: f64,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    LossEvaluator::new().composite(problem, net, set, lambda, weights, None)
}

/// Mean squared error of the network against the labels of `test`.
pub fn evaluate(net: &Mlp, test: &SampleSet) -> f64 {
    if test.points.is_empty() {
        return 0.0;
    }
    let mut input = Vec::new();
    let sum: f64 = test
        .points
        .iter()
        .map(|p| {
            input.clear();
            input.extend_from_slice(&p.x);
            input.push(p.t);
            let e = net.predict(&input) - p.label;
            e * e
        })
        .sum();
    sum / test.points.len() as f64
}
