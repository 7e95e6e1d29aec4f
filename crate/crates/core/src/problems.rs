//! PDE benchmarks: Kuramoto-Sivashinsky, Sawada-Kotera and Allen-Cahn.
//!
//! Each problem is written as `u_t + N[u] = f` on `Omega x [0, T]`. The
//! boundary data `g`, initial data `h` and forcing `f` are all manufactured
//! from a closed-form exact solution. The forcing is obtained by pushing the
//! exact solution through the same jet pipeline as the network, so no
//! hand-derived formula appears on any code path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LeafRole, Result};
use crate::jet::Jet;
use crate::network::Mlp;
use crate::tape::{Tape, Var};

/// Anything that maps input jets `[x_1, .., x_d, t]` to an output jet.
pub trait Field {
    fn eval(&self, tape: &mut Tape, inputs: &[Jet]) -> Result<Jet>;

    /// Jets along input directions `(i, seed)` at `point`, every other
    /// input held at its value.
    fn eval_directions(
        &self,
        tape: &mut Tape,
        point: &[Var],
        dirs: &[(usize, &Jet)],
    ) -> Result<Vec<Jet>> {
        let base: Vec<Jet> = point.iter().map(|&v| Jet::seed(tape, v, 0)).collect();
        dirs.iter()
            .map(|&(i, seed)| {
                let mut inputs = base.clone();
                inputs[i] = seed.clone();
                self.eval(tape, &inputs)
            })
            .collect()
    }
}

/// A network whose parameters are already recorded on the tape.
pub struct NetField<'a> {
    pub net: &'a Mlp,
    pub leaves: &'a [Var],
}

impl Field for NetField<'_> {
    fn eval(&self, tape: &mut Tape, inputs: &[Jet]) -> Result<Jet> {
        self.net.forward(tape, self.leaves, inputs)
    }

    fn eval_directions(
        &self,
        tape: &mut Tape,
        point: &[Var],
        dirs: &[(usize, &Jet)],
    ) -> Result<Vec<Jet>> {
        self.net.forward_directions(tape, self.leaves, point, dirs)
    }
}

/// The closed-form exact solution of a problem, evaluated in jet arithmetic.
pub struct ExactField<'a>(pub &'a ProblemSpec);

impl Field for ExactField<'_> {
    fn eval(&self, tape: &mut Tape, inputs: &[Jet]) -> Result<Jet> {
        self.0.exact_jet(tape, inputs)
    }
}

/// Coordinates of one space-time point as tape variables.
#[derive(Debug, Clone)]
pub struct PointVars {
    pub x: Vec<Var>,
    pub t: Var,
}

impl PointVars {
    pub fn record(tape: &mut Tape, x: &[f64], t: f64) -> Result<PointVars> {
        let x = x
            .iter()
            .map(|&v| tape.leaf(v, LeafRole::Input))
            .collect::<Result<Vec<_>>>()?;
        let t = tape.leaf(t, LeafRole::Input)?;
        Ok(PointVars { x, t })
    }

    fn scalar_jets(&self, tape: &mut Tape) -> Vec<Jet> {
        self.x
            .iter()
            .chain(std::iter::once(&self.t))
            .map(|&v| Jet::seed(tape, v, 0))
            .collect()
    }
}

/// Derivative jets of a field at one point: one pass per spatial dimension
/// with that coordinate seeded to `x_order`, and one first-order pass in `t`.
#[derive(Debug, Clone)]
pub struct UJets {
    pub x: Vec<Jet>,
    pub t: Jet,
}

impl UJets {
    pub fn value(&self) -> Var {
        self.x[0].value()
    }

    fn x_order(&self) -> usize {
        self.x.iter().map(Jet::order).min().unwrap_or(0)
    }
}

pub fn field_jets(
    tape: &mut Tape,
    field: &dyn Field,
    point: &PointVars,
    x_order: usize,
) -> Result<UJets> {
    let d = point.x.len();
    let coords: Vec<Var> = point.x.iter().copied().chain(std::iter::once(point.t)).collect();
    let seeds: Vec<Jet> = (0..=d)
        .map(|i| Jet::seed(tape, coords[i], if i < d { x_order } else { 1 }))
        .collect();
    let dirs: Vec<(usize, &Jet)> = seeds.iter().enumerate().collect();
    let mut x = field.eval_directions(tape, &coords, &dirs)?;
    let t = x.pop().expect("time direction");
    Ok(UJets { x, t })
}

/// Scalar evaluation of a field (order-0 jets).
pub fn field_value(tape: &mut Tape, field: &dyn Field, point: &PointVars) -> Result<Var> {
    let inputs = point.scalar_jets(tape);
    Ok(field.eval(tape, &inputs)?.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KsSolution {
    /// `sin(x + t)`
    #[default]
    SinXPlusT,
    /// `e^t cos(x) sin(1 + x)`
    ExpCosSin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemParams {
    /// `u_t + u u_x + u_xx + nu u_xxxx = f`
    Ks {
        nu: f64,
        #[serde(default)]
        solution: KsSolution,
    },
    /// Seventh-order Sawada-Kotera, homogeneous, one-soliton solution.
    Sk { k: f64 },
    /// `u_t = lap(u) + u - u^3 + f`
    Ac { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    /// `[lo, hi]` per spatial dimension.
    pub x: Vec<(f64, f64)>,
    /// Final time `T`; time runs over `[0, T]`.
    pub t_max: f64,
}

impl Domain {
    pub fn cube(d: usize, lo: f64, hi: f64, t_max: f64) -> Domain {
        Domain {
            x: vec![(lo, hi); d],
            t_max,
        }
    }

    /// Bounds of coordinate `i`, where `i == d` is time.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        if i < self.x.len() {
            self.x[i]
        } else {
            (0.0, self.t_max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    pub domain: Domain,
    pub params: ProblemParams,
}

impl ProblemSpec {
    /// KS with `u = sin(x + t)` on `[0, 2 pi] x [0, 1]`.
    pub fn kuramoto_sivashinsky(nu: f64) -> ProblemSpec {
        ProblemSpec {
            d: 1,
            domain: Domain::cube(1, 0.0, 2.0 * PI, 1.0),
            params: ProblemParams::Ks {
                nu,
                solution: KsSolution::SinXPlusT,
            },
        }
    }

    /// SK soliton with parameter `k` on `[0, 5] x [0, 5]`.
    pub fn sawada_kotera(k: f64) -> ProblemSpec {
        ProblemSpec {
            d: 1,
            domain: Domain::cube(1, 0.0, 5.0, 5.0),
            params: ProblemParams::Sk { k },
        }
    }

    /// Allen-Cahn in `d` dimensions on `[0, pi]^d x [0, 3]`.
    pub fn allen_cahn(d: usize, alpha: f64) -> ProblemSpec {
        ProblemSpec {
            d,
            domain: Domain::cube(d, 0.0, PI, 3.0),
            params: ProblemParams::Ac { alpha },
        }
    }

    pub fn with_domain(mut self, x: (f64, f64), t_max: f64) -> ProblemSpec {
        self.domain = Domain::cube(self.d, x.0, x.1, t_max);
        self
    }

    pub fn with_ks_solution(mut self, s: KsSolution) -> ProblemSpec {
        if let ProblemParams::Ks { solution, .. } = &mut self.params {
            *solution = s;
        }
        self
    }

    pub fn name(&self) -> &'static str {
        match self.params {
            ProblemParams::Ks { .. } => "ks",
            ProblemParams::Sk { .. } => "sk",
            ProblemParams::Ac { .. } => "ac",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProblem(m));
        if self.d == 0 || self.domain.x.len() != self.d {
            return bad(format!("domain has {} intervals for d={}", self.domain.x.len(), self.d));
        }
        if self.domain.x.iter().any(|&(lo, hi)| !(lo < hi)) || !(self.domain.t_max > 0.0) {
            return bad(format!("degenerate domain {:?}", self.domain));
        }
        match self.params {
            ProblemParams::Ks { nu, .. } if !(nu > 0.0) => bad(format!("nu must be > 0, got {nu}")),
            ProblemParams::Ks { .. } if self.d != 1 => bad("KS is one-dimensional".into()),
            ProblemParams::Sk { k } if k == 0.0 || !k.is_finite() => {
                bad(format!("k must be non-zero, got {k}"))
            }
            ProblemParams::Sk { .. } if self.d != 1 => bad("SK is one-dimensional".into()),
            ProblemParams::Ac { alpha } if !alpha.is_finite() => bad("alpha must be finite".into()),
            _ => Ok(()),
        }
    }

    /// Highest x-derivative order the residual reads.
    pub fn max_x_order(&self) -> usize {
        match self.params {
            ProblemParams::Ks { .. } => 4,
            ProblemParams::Sk { .. } => 7,
            ProblemParams::Ac { .. } => 2,
        }
    }

    pub fn exact(&self, x: &[f64], t: f64) -> f64 {
        match self.params {
            ProblemParams::Ks {
                solution: KsSolution::SinXPlusT,
                ..
            } => (x[0] + t).sin(),
            ProblemParams::Ks {
                solution: KsSolution::ExpCosSin,
                ..
            } => t.exp() * x[0].cos() * (1.0 + x[0]).sin(),
            ProblemParams::Sk { k } => {
                let th = (k * (x[0] + sk_speed(k) * t)).tanh();
                4.0 * k * k / 3.0 * (2.0 - 3.0 * th * th)
            }
            ProblemParams::Ac { alpha } => {
                let s: f64 = x.iter().sum();
                (alpha * s / (self.d as f64).sqrt()).sin() * (2.0 * t).cos()
            }
        }
    }

    /// Boundary data `g(x, t)`.
    pub fn boundary_label(&self, x: &[f64], t: f64) -> f64 {
        self.exact(x, t)
    }

    /// Initial data `h(x)`.
    pub fn initial_label(&self, x: &[f64]) -> f64 {
        self.exact(x, 0.0)
    }

    fn exact_jet(&self, tape: &mut Tape, inputs: &[Jet]) -> Result<Jet> {
        let order = inputs.iter().map(Jet::order).max().unwrap_or(0);
        let inputs: Vec<Jet> = inputs.iter().map(|j| j.lift(tape, order)).collect();
        let (x, t) = (&inputs[0], &inputs[self.d]);
        Ok(match self.params {
            ProblemParams::Ks {
                solution: KsSolution::SinXPlusT,
                ..
            } => x.add(tape, t)?.sin(tape),
            ProblemParams::Ks {
                solution: KsSolution::ExpCosSin,
                ..
            } => {
                let s = x.add_const(tape, 1.0).sin(tape);
                let cx = x.cos(tape);
                t.exp(tape).mul(tape, &cx)?.mul(tape, &s)?
            }
            ProblemParams::Sk { k } => {
                let shifted = t.scale(tape, sk_speed(k));
                let z = x.add(tape, &shifted)?.scale(tape, k);
                let th = z.tanh(tape);
                th.square(tape)
                    .scale(tape, -4.0 * k * k)
                    .add_const(tape, 8.0 * k * k / 3.0)
            }
            ProblemParams::Ac { alpha } => {
                let mut s = inputs[0].clone();
                for xi in &inputs[1..self.d] {
                    s = s.add(tape, xi)?;
                }
                let arg = s.scale(tape, alpha / (self.d as f64).sqrt());
                let c2t = t.scale(tape, 2.0).cos(tape);
                arg.sin(tape).mul(tape, &c2t)?
            }
        })
    }

    /// `u_t + N[u]` from the derivative jets of some field.
    pub fn operator(&self, tape: &mut Tape, u: &UJets) -> Result<Var> {
        if u.x.len() != self.d || u.x_order() < self.max_x_order() || u.t.order() < 1 {
            return Err(Error::InsufficientJetOrder {
                problem: self.name(),
                needed_x: self.max_x_order(),
                got_x: u.x_order(),
                got_t: u.t.order(),
            });
        }
        match self.params {
            ProblemParams::Ks { nu, .. } => ks_operator(tape, nu, u),
            ProblemParams::Sk { .. } => sk_operator(tape, u),
            ProblemParams::Ac { .. } => ac_operator(tape, u),
        }
    }

    /// Forcing `f` at a point, as a tape expression of the coordinates.
    /// `None` for homogeneous problems.
    pub fn forcing_on_tape(&self, tape: &mut Tape, point: &PointVars) -> Result<Option<Var>> {
        if let ProblemParams::Sk { .. } = self.params {
            return Ok(None);
        }
        let exact = ExactField(self);
        let u = field_jets(tape, &exact, point, self.max_x_order())?;
        self.operator(tape, &u).map(Some)
    }

    pub fn forcing(&self, x: &[f64], t: f64) -> f64 {
        let mut tape = Tape::new();
        let point = PointVars::record(&mut tape, x, t).expect("finite point");
        self.forcing_on_tape(&mut tape, &point)
            .expect("exact jets have the required order")
            .map_or(0.0, |f| tape.value(f))
    }

    /// `u_t + N[u] - f` at `point`.
    pub fn residual(&self, tape: &mut Tape, u: &UJets, point: &PointVars) -> Result<Var> {
        let lhs = self.operator(tape, u)?;
        Ok(match self.forcing_on_tape(tape, point)? {
            Some(f) => tape.sub(lhs, f),
            None => lhs,
        })
    }

    /// Residual of the network at `point`, building all jets on `tape`.
    pub fn network_residual(
        &self,
        tape: &mut Tape,
        field: &dyn Field,
        point: &PointVars,
    ) -> Result<Var> {
        let u = field_jets(tape, field, point, self.max_x_order())?;
        self.residual(tape, &u, point)
    }
}

/// Soliton speed `256 k^6 / 3`. The wave travels toward -x: with this
/// sign convention for the equation, `x - c t` leaves an O(1) residual.
fn sk_speed(k: f64) -> f64 {
    256.0 * k.powi(6) / 3.0
}

fn ks_operator(tape: &mut Tape, nu: f64, u: &UJets) -> Result<Var> {
    let ux = &u.x[0];
    let v = ux.value();
    let v1 = ux.derivative(tape, 1)?;
    let v2 = ux.derivative(tape, 2)?;
    let v4 = ux.derivative(tape, 4)?;
    let vt = u.t.derivative(tape, 1)?;
    let adv = tape.mul(v, v1);
    let visc = tape.scale(v4, nu);
    let a = tape.add(vt, adv);
    let b = tape.add(v2, visc);
    Ok(tape.add(a, b))
}

/// `u_t + d/dx [63u^4 + 63(2u^2 u_xx + u u_x^2) + 21(u u_xxxx + u_xx^2 + u_x u_xxx) + u_xxxxxx]`.
///
/// The bracket is assembled in first-order jet arithmetic from shifted
/// copies of the x-jet, then differentiated once.
fn sk_operator(tape: &mut Tape, u: &UJets) -> Result<Var> {
    let ux = &u.x[0];
    let d = |tape: &mut Tape, m: usize| -> Result<Jet> { ux.shift(tape, m)?.truncate(1) };
    let (u0, u1, u2, u3, u4, u6) = (
        ux.truncate(1)?,
        d(tape, 1)?,
        d(tape, 2)?,
        d(tape, 3)?,
        d(tape, 4)?,
        d(tape, 6)?,
    );
    let u0sq = u0.square(tape);
    let quartic = u0sq.square(tape);

    let a = u0sq.mul(tape, &u2)?.scale(tape, 2.0);
    let b = u1.square(tape).mul(tape, &u0)?;
    let group63 = quartic.add(tape, &a)?.add(tape, &b)?.scale(tape, 63.0);

    let c = u0.mul(tape, &u4)?;
    let e = u2.square(tape);
    let g = u1.mul(tape, &u3)?;
    let group21 = c.add(tape, &e)?.add(tape, &g)?.scale(tape, 21.0);

    let bracket = group63.add(tape, &group21)?.add(tape, &u6)?;
    let bx = bracket.derivative(tape, 1)?;
    let vt = u.t.derivative(tape, 1)?;
    Ok(tape.add(vt, bx))
}

fn ac_operator(tape: &mut Tape, u: &UJets) -> Result<Var> {
    let v = u.value();
    let mut lap = u.x[0].derivative(tape, 2)?;
    for xi in &u.x[1..] {
        let dii = xi.derivative(tape, 2)?;
        lap = tape.add(lap, dii);
    }
    let vt = u.t.derivative(tape, 1)?;
    let cube = tape.powi(v, 3);
    let a = tape.sub(vt, lap);
    let b = tape.sub(cube, v);
    Ok(tape.add(a, b))
}
