use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::problems::ProblemSpec;

/// A rectangular evaluation grid. For `d = 1` the axes are `(x, t)`; for
/// `d >= 2` they are `(x1, x2)` at time `t`, with the remaining spatial
/// coordinates held at `others`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    /// Time slice for `d >= 2`; `None` means `t_max / 2`.
    pub t: Option<f64>,
    pub others: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n1: 100,
            n2: 100,
            t: None,
            others: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub coord1: f64,
    pub coord2: f64,
    pub u_exact: f64,
    pub u_pred: f64,
    pub abs_error: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// `|u_pred - u_exact|` over the grid, row-major with `coord1` outer.
pub fn error_grid(problem: &ProblemSpec, predict: &dyn Fn(&[f64]) -> f64, spec: &GridSpec) -> Result<Vec<GridRow>> {
    if spec.n1 == 0 || spec.n2 == 0 {
        return Err(Error::Config("grid needs at least one point per axis".into()));
    }
    let d = problem.d;
    // Axis 1 is time when d = 1.
    let (lo1, hi1) = problem.domain.bounds(0);
    let (lo2, hi2) = problem.domain.bounds(1);
    let t = spec.t.unwrap_or(problem.domain.t_max / 2.0);
    let mut rows = Vec::with_capacity(spec.n1 * spec.n2);
    let mut input = vec![spec.others; d + 1];
    for c1 in linspace(lo1, hi1, spec.n1) {
        for c2 in linspace(lo2, hi2, spec.n2) {
            input[0] = c1;
            input[1] = c2;
            if d >= 2 {
                input[d] = t;
            }
            let u_exact = problem.exact(&input[..d], input[d]);
            let u_pred = predict(&input);
            rows.push(GridRow {
                coord1: c1,
                coord2: c2,
                u_exact,
                u_pred,
                abs_error: (u_pred - u_exact).abs(),
            });
        }
    }
    Ok(rows)
}

pub const GRID_CSV_HEADER: &str = "coord1,coord2,u_exact,u_pred,abs_error";

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::with_capacity(64 * rows.len());
    out.push_str(GRID_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{:e},{:e},{:e}", r.coord1, r.coord2, r.u_exact, r.u_pred, r.abs_error).unwrap();
    }
    out
}

/// The network's error grid; fails if the network's dimension is not the problem's.
pub fn export_error_grid(net: &Mlp, problem: &ProblemSpec, spec: &GridSpec) -> Result<Vec<GridRow>> {
    if net.spatial_dim() != problem.d {
        return Err(Error::InputWidth {
            expected: problem.d + 1,
            got: net.input_dim(),
        });
    }
    error_grid(problem, &|x| net.predict(x), spec)
}
