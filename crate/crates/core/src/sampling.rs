//! Latin hypercube sampling of training and test points.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::problems::ProblemSpec;

/// `n` samples in `[0, 1)^dims`; every dimension has exactly one sample in
/// each stratum `[i/n, (i+1)/n)`, with independent stratum permutations.
pub fn lhs(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_with(n, dims, &mut rng)
}

fn lhs_with(n: usize, dims: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..dims {
        strata.shuffle(rng);
        for (row, &s) in out.iter_mut().zip(&strata) {
            let u: f64 = rng.sample(Open01);
            // Guard against rounding up into the next stratum.
            row[j] = ((s as f64 + u) / n as f64).min((s as f64 + 1.0) / n as f64 - f64::EPSILON);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PointKind {
    /// Interior point; the PDE residual is penalized, label 0.
    Collocation,
    /// On spatial face `face = 2 * dim + side` (`side` 0 = lower, 1 = upper).
    Boundary { face: usize },
    /// On the `t = 0` slice.
    Initial,
    /// Held-out evaluation point labelled by the exact solution.
    Test,
}

impl PointKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PointKind::Collocation => "collocation",
            PointKind::Boundary { .. } => "boundary",
            PointKind::Initial => "initial",
            PointKind::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub kind: PointKind,
    pub label: f64,
}

impl SamplePoint {
    /// Which of the `d + 1` coordinates (time last) may move under a
    /// perturbation without changing the point's kind.
    pub fn free_mask(&self) -> Vec<bool> {
        let d = self.x.len();
        let mut mask = vec![true; d + 1];
        match self.kind {
            PointKind::Boundary { face } => mask[face / 2] = false,
            PointKind::Initial => mask[d] = false,
            PointKind::Collocation | PointKind::Test => {}
        }
        mask
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i < self.x.len() {
            self.x[i]
        } else {
            self.t
        }
    }

    pub fn set_coord(&mut self, i: usize, v: f64) {
        if i < self.x.len() {
            self.x[i] = v;
        } else {
            self.t = v;
        }
    }

    /// Recomputes the label from the problem data at the current coordinates.
    pub fn relabel(&mut self, problem: &ProblemSpec) {
        self.label = match self.kind {
            PointKind::Collocation => 0.0,
            PointKind::Boundary { .. } => problem.boundary_label(&self.x, self.t),
            PointKind::Initial => problem.initial_label(&self.x),
            PointKind::Test => problem.exact(&self.x, self.t),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<SamplePoint>,
    pub seed: u64,
}

impl SampleSet {
    pub fn count(&self, pred: impl Fn(&PointKind) -> bool) -> usize {
        self.points.iter().filter(|p| pred(&p.kind)).count()
    }

    pub fn n_collocation(&self) -> usize {
        self.count(|k| matches!(k, PointKind::Collocation))
    }

    pub fn n_boundary(&self) -> usize {
        self.count(|k| matches!(k, PointKind::Boundary { .. }))
    }

    pub fn n_initial(&self) -> usize {
        self.count(|k| matches!(k, PointKind::Initial))
    }

    /// CSV with columns `kind, x1..xd, t, label`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.x.len());
        let mut out = String::from("kind");
        for i in 1..=d {
            write!(out, ",x{i}").unwrap();
        }
        out.push_str(",t,label\n");
        for p in &self.points {
            out.push_str(p.kind.tag());
            for v in &p.x {
                write!(out, ",{v:e}").unwrap();
            }
            writeln!(out, ",{:e},{:e}", p.t, p.label).unwrap();
        }
        out
    }
}

fn scale(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + u * (hi - lo)
}

/// Training points (collocation, boundary, initial) and test points.
///
/// `n_u` is split between initial and boundary points, the odd one going to
/// the initial set. Boundary points cycle through the `2d` spatial faces.
pub fn sample_problem(
    problem: &ProblemSpec,
    n_f: usize,
    n_u: usize,
    n_test: usize,
    train_seed: u64,
    test_seed: u64,
) -> (SampleSet, SampleSet) {
    let d = problem.d;
    let dom = &problem.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(train_seed);
    let mut points = Vec::with_capacity(n_f + n_u);

    for row in lhs_with(n_f, d + 1, &mut rng) {
        let x = (0..d).map(|i| scale(row[i], dom.x[i])).collect();
        let t = scale(row[d], (0.0, dom.t_max));
        points.push(SamplePoint {
            x,
            t,
            kind: PointKind::Collocation,
            label: 0.0,
        });
    }

    let n_boundary = n_u / 2;
    let n_initial = n_u - n_boundary;
    for row in lhs_with(n_initial, d, &mut rng) {
        let x: Vec<f64> = (0..d).map(|i| scale(row[i], dom.x[i])).collect();
        let mut p = SamplePoint {
            x,
            t: 0.0,
            kind: PointKind::Initial,
            label: 0.0,
        };
        p.relabel(problem);
        points.push(p);
    }

    // Free coordinates of a boundary point: the other d - 1 space dims and t.
    for (n, row) in lhs_with(n_boundary, d, &mut rng).into_iter().enumerate() {
        let face = n % (2 * d);
        let (dim, side) = (face / 2, face % 2);
        let mut free = row.into_iter();
        let mut x = Vec::with_capacity(d);
        for i in 0..d {
            if i == dim {
                let (lo, hi) = dom.x[i];
                x.push(if side == 0 { lo } else { hi });
            } else {
                x.push(scale(free.next().unwrap(), dom.x[i]));
            }
        }
        let t = scale(free.next().unwrap(), (0.0, dom.t_max));
        let mut p = SamplePoint {
            x,
            t,
            kind: PointKind::Boundary { face },
            label: 0.0,
        };
        p.relabel(problem);
        points.push(p);
    }

    let train = SampleSet {
        points,
        seed: train_seed,
    };
    (train, sample_test(problem, n_test, test_seed))
}

/// `n` points over the full space-time box, labelled by the exact solution.
pub fn sample_test(problem: &ProblemSpec, n: usize, seed: u64) -> SampleSet {
    let d = problem.d;
    let points = lhs(n, d + 1, seed)
        .into_iter()
        .map(|row| {
            let mut p = SamplePoint {
                x: (0..d).map(|i| scale(row[i], problem.domain.x[i])).collect(),
                t: scale(row[d], (0.0, problem.domain.t_max)),
                kind: PointKind::Test,
                label: 0.0,
            };
            p.relabel(problem);
            p
        })
        .collect();
    SampleSet { points, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratified(samples: &[Vec<f64>], dim: usize) -> bool {
        let n = samples.len();
        let mut hit = vec![false; n];
        for s in samples {
            let v = s[dim];
            if !(0.0..1.0).contains(&v) {
                return false;
            }
            let k = (v * n as f64).floor() as usize;
            if hit[k] {
                return false;
            }
            hit[k] = true;
        }
        hit.into_iter().all(|h| h)
    }

    #[test]
    fn four_strata() {
        let mut v: Vec<f64> = lhs(4, 1, 42).into_iter().map(|r| r[0]).collect();
        v.sort_by(f64::total_cmp);
        for (i, x) in v.iter().enumerate() {
            assert!(*x >= i as f64 * 0.25 && *x < (i + 1) as f64 * 0.25);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(lhs(16, 3, 5), lhs(16, 3, 5));
        assert_ne!(lhs(16, 3, 5), lhs(16, 3, 6));
    }

    proptest! {
        #[test]
        fn every_dimension_is_stratified(n in 1usize..200, dims in 1usize..6, seed in any::<u64>()) {
            let s = lhs(n, dims, seed);
            prop_assert_eq!(s.len(), n);
            for j in 0..dims {
                prop_assert!(stratified(&s, j));
            }
        }
    }

    #[test]
    fn ks_split_and_labels() {
        let p = ProblemSpec::kuramoto_sivashinsky(0.5);
        let (train, test) = sample_problem(&p, 200, 20, 100, 1, 2);
        assert_eq!(train.n_collocation(), 200);
        assert_eq!(train.n_initial(), 10);
        assert_eq!(train.n_boundary(), 10);
        assert_eq!(test.points.len(), 100);
        for q in &train.points {
            match q.kind {
                PointKind::Collocation => {
                    assert_eq!(q.label, 0.0);
                    assert!(q.x[0] > 0.0 && q.x[0] < 2.0 * std::f64::consts::PI);
                    assert!(q.t > 0.0 && q.t < 1.0);
                }
                PointKind::Initial => {
                    assert_eq!(q.t, 0.0);
                    assert!((q.label - p.exact(&q.x, 0.0)).abs() < 1e-12);
                }
                PointKind::Boundary { face } => {
                    let want = if face % 2 == 0 { 0.0 } else { 2.0 * std::f64::consts::PI };
                    assert_eq!(q.x[face / 2], want);
                    assert!((q.label - p.exact(&q.x, q.t)).abs() < 1e-12);
                }
                PointKind::Test => unreachable!(),
            }
        }
        for q in &test.points {
            assert_eq!(q.label, p.exact(&q.x, q.t));
        }
    }

    #[test]
    fn odd_split_and_faces_round_robin() {
        let p = ProblemSpec::allen_cahn(3, 1.0);
        let (train, _) = sample_problem(&p, 10, 13, 5, 3, 4);
        assert_eq!(train.n_initial(), 7);
        assert_eq!(train.n_boundary(), 6);
        let faces: Vec<usize> = train
            .points
            .iter()
            .filter_map(|q| match q.kind {
                PointKind::Boundary { face } => Some(face),
                _ => None,
            })
            .collect();
        assert_eq!(faces, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let p = ProblemSpec::sawada_kotera(0.5);
        let a = sample_problem(&p, 30, 10, 20, 7, 8);
        let b = sample_problem(&p, 30, 10, 20, 7, 8);
        assert_eq!(a, b);
        let c = sample_problem(&p, 30, 10, 20, 9, 8);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn collocation_coordinates_stratified_in_domain_units() {
        let p = ProblemSpec::allen_cahn(2, 1.0);
        let (train, _) = sample_problem(&p, 64, 2, 1, 11, 12);
        let rows: Vec<Vec<f64>> = train
            .points
            .iter()
            .filter(|q| q.kind == PointKind::Collocation)
            .map(|q| {
                let mut r: Vec<f64> = q.x.iter().map(|v| v / std::f64::consts::PI).collect();
                r.push(q.t / 3.0);
                r
            })
            .collect();
        for j in 0..3 {
            assert!(stratified(&rows, j));
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let p = ProblemSpec::allen_cahn(2, 1.0);
        let (train, _) = sample_problem(&p, 3, 2, 1, 0, 1);
        let csv = train.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("kind,x1,x2,t,label"));
        assert_eq!(lines.count(), 5);
    }
}
