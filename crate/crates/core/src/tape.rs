//! Scalar reverse-mode automatic differentiation on an append-only tape.
//!
//! Every recorded node stores its primal value and the exact local partial
//! derivatives with respect to at most two earlier nodes. A single reverse
//! sweep in decreasing id order then yields the adjoint of every node.
//!
//! The tape is rebuilt for every loss evaluation; there is no persistent
//! graph. Reuse one allocation across evaluations with [`Tape::clear`].

use crate::error::{Error, LeafRole, Result};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum OpCode {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    Powi,
    Scale,
}

impl OpCode {
    pub fn arity(self) -> usize {
        match self {
            OpCode::Leaf => 0,
            OpCode::Add | OpCode::Sub | OpCode::Mul | OpCode::Div => 2,
            _ => 1,
        }
    }
}

/// The fixed primitive set accepted by [`Tape::apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    Powi(i32),
    Scale(f64),
}

/// Append-only record of a scalar computation.
///
/// Nodes are stored as one array of records. Nodes with fewer than two
/// inputs point their unused input slots at themselves with a zero partial,
/// which keeps the reverse sweep branch-free; [`Tape::inputs`] reports only
/// the real inputs.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    args: [u32; 2],
    partials: [f64; 2],
    value: f64,
    op: OpCode,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adjoints {
    adjoints: Vec<f64>,
}

impl Adjoints {
    pub fn get(&self, v: Var) -> f64 {
        self.adjoints[v.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.adjoints
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.adjoints
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(n),
            first_non_finite: None,
        }
    }

    /// Drops every node but keeps the allocation.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.first_non_finite = None;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn opcode(&self, v: Var) -> OpCode {
        self.nodes[v.index()].op
    }

    /// Real input ids of a node (zero, one or two of them).
    pub fn inputs(&self, v: Var) -> Vec<Var> {
        let i = v.index();
        self.nodes[i].args[..self.nodes[i].op.arity()]
            .iter()
            .map(|&a| Var(a))
            .collect()
    }

    /// Local partial derivatives matching [`Tape::inputs`].
    pub fn local_partials(&self, v: Var) -> Vec<f64> {
        let i = v.index();
        self.nodes[i].partials[..self.nodes[i].op.arity()].to_vec()
    }

    /// The first node whose value was not finite, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.first_non_finite
    }

    #[inline]
    fn push(&mut self, op: OpCode, args: [u32; 2], partials: [f64; 2], value: f64) -> Var {
        let id = self.nodes.len();
        debug_assert!(id < u32::MAX as usize);
        if !value.is_finite() && self.first_non_finite.is_none() {
            self.first_non_finite = Some(id);
        }
        self.nodes.push(Node {
            args,
            partials,
            value,
            op,
        });
        Var(id as u32)
    }

    #[inline]
    fn next_id(&self) -> u32 {
        self.nodes.len() as u32
    }

    #[inline]
    fn push_unary(&mut self, op: OpCode, a: Var, da: f64, value: f64) -> Var {
        let me = self.next_id();
        self.push(op, [a.0, me], [da, 0.0], value)
    }

    /// Records an independent variable.
    pub fn leaf(&mut self, value: f64, role: LeafRole) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteLeaf { role, value });
        }
        let me = self.next_id();
        Ok(self.push(OpCode::Leaf, [me, me], [0.0, 0.0], value))
    }

    /// Leaf for a known-finite constant; panics on NaN or infinity.
    pub fn constant(&mut self, value: f64) -> Var {
        self.leaf(value, LeafRole::Constant)
            .expect("tape constants must be finite")
    }

    /// Checked dispatcher over the primitive set.
    pub fn apply(&mut self, op: Primitive, args: &[Var]) -> Result<Var> {
        let want = match op {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => 2,
            _ => 1,
        };
        assert_eq!(args.len(), want, "{op:?} takes {want} argument(s)");
        for a in args {
            assert!(a.index() < self.len(), "{a:?} does not belong to this tape");
        }
        let a = args[0];
        let out = match op {
            Primitive::Add => self.add(a, args[1]),
            Primitive::Sub => self.sub(a, args[1]),
            Primitive::Mul => self.mul(a, args[1]),
            Primitive::Div => self.div(a, args[1])?,
            Primitive::Neg => self.neg(a),
            Primitive::Sin => self.sin(a),
            Primitive::Cos => self.cos(a),
            Primitive::Exp => self.exp(a),
            Primitive::Tanh => self.tanh(a),
            Primitive::Powi(n) => self.powi(a, n),
            Primitive::Scale(c) => self.scale(a, c),
        };
        if !self.value(out).is_finite() {
            return Err(Error::NonFiniteValue { node: out.index() });
        }
        Ok(out)
    }

    #[inline]
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(OpCode::Add, [a.0, b.0], [1.0, 1.0], v)
    }

    #[inline]
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(OpCode::Sub, [a.0, b.0], [1.0, -1.0], v)
    }

    #[inline]
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(OpCode::Mul, [a.0, b.0], [y, x], x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if y == 0.0 {
            return Err(Error::DivisionByZero {
                node: self.len(),
            });
        }
        let q = x / y;
        Ok(self.push(OpCode::Div, [a.0, b.0], [1.0 / y, -q / y], q))
    }

    #[inline]
    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push_unary(OpCode::Neg, a, -1.0, v)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let (s, c) = self.value(a).sin_cos();
        self.push_unary(OpCode::Sin, a, c, s)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let (s, c) = self.value(a).sin_cos();
        self.push_unary(OpCode::Cos, a, -s, c)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.push_unary(OpCode::Exp, a, e, e)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.push_unary(OpCode::Tanh, a, 1.0 - t * t, t)
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        let x = self.value(a);
        let d = if n == 0 {
            0.0
        } else {
            n as f64 * x.powi(n - 1)
        };
        self.push_unary(OpCode::Powi, a, d, x.powi(n))
    }

    #[inline]
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push_unary(OpCode::Scale, a, c, v)
    }

    /// Left-to-right sum; `None` for an empty slice.
    pub fn sum(&mut self, terms: &[Var]) -> Option<Var> {
        let (&first, rest) = terms.split_first()?;
        Some(rest.iter().fold(first, |acc, &t| self.add(acc, t)))
    }

    /// Reverse sweep seeded at `output`.
    pub fn backward(&self, output: Var) -> Result<Adjoints> {
        let mut adjoints = Vec::new();
        self.backward_into(output, &mut adjoints)?;
        Ok(Adjoints { adjoints })
    }

    /// Same as [`Tape::backward`] but reuses `adjoints` as the buffer. On
    /// success `adjoints.len() == self.len()`.
    pub fn backward_into(&self, output: Var, adjoints: &mut Vec<f64>) -> Result<()> {
        let out = output.index();
        assert!(out < self.len(), "{output:?} does not belong to this tape");
        if let Some(node) = self.first_non_finite {
            if node <= out {
                return Err(Error::NonFiniteValue { node });
            }
        }
        adjoints.clear();
        adjoints.resize(self.len(), 0.0);
        adjoints[out] = 1.0;
        let nodes = &self.nodes[..=out];
        for i in (0..=out).rev() {
            let g = adjoints[i];
            if g == 0.0 {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteAdjoint { node: i });
            }
            let Node {
                args: [a, b],
                partials: [da, db],
                ..
            } = nodes[i];
            adjoints[a as usize] += da * g;
            adjoints[b as usize] += db * g;
        }
        // Self-referencing slots of leaves and unary nodes add zero; the seed
        // keeps its value because nothing downstream of `out` is visited.
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn leaf_seed_is_one() {
        let mut t = Tape::new();
        let x = t.leaf(2.0, LeafRole::Input).unwrap();
        let adj = t.backward(x).unwrap();
        assert_eq!(adj.get(x), 1.0);
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let a = t.leaf(2.0, LeafRole::Input).unwrap();
        let b = t.leaf(3.0, LeafRole::Input).unwrap();
        let c = t.mul(a, b);
        let adj = t.backward(c).unwrap();
        assert_eq!((adj.get(a), adj.get(b)), (3.0, 2.0));
    }

    #[test]
    fn nan_leaf_rejected_with_role() {
        let mut t = Tape::new();
        let err = t.leaf(f64::NAN, LeafRole::Bias).unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
    }

    #[test]
    fn tanh_and_sin_local_partials() {
        let mut t = Tape::new();
        let z = t.constant(0.0);
        let th = t.apply(Primitive::Tanh, &[z]).unwrap();
        assert_eq!(t.value(th), 0.0);
        assert_eq!(t.local_partials(th), vec![1.0]);

        let h = t.constant(std::f64::consts::FRAC_PI_2);
        let s = t.apply(Primitive::Sin, &[h]).unwrap();
        assert_eq!(t.value(s), 1.0);
        assert!(t.local_partials(s)[0].abs() < 1e-16);
        assert_eq!(t.inputs(s), vec![h]);
        assert!(t.inputs(h).is_empty());
    }

    #[test]
    fn div_by_zero_carries_node_id() {
        let mut t = Tape::new();
        let one = t.constant(1.0);
        let zero = t.constant(0.0);
        match t.apply(Primitive::Div, &[one, zero]) {
            Err(Error::DivisionByZero { node }) => assert_eq!(node, 2),
            other => panic!("expected division error, got {other:?}"),
        }
    }

    #[test]
    fn analytic_gradients() {
        let mut t = Tape::new();
        let x = t.leaf(2.0, LeafRole::Input).unwrap();
        let y = t.leaf(3.0, LeafRole::Input).unwrap();
        let xy = t.mul(x, y);
        let sx = t.sin(x);
        let f = t.add(xy, sx);
        let adj = t.backward(f).unwrap();
        assert!((adj.get(x) - (3.0 + 2f64.cos())).abs() < 1e-15);
        assert_eq!(adj.get(y), 2.0);

        t.clear();
        let w = t.leaf(0.3, LeafRole::Weight).unwrap();
        let x = t.leaf(1.0, LeafRole::Input).unwrap();
        let wx = t.mul(w, x);
        let f = t.tanh(wx);
        let adj = t.backward(f).unwrap();
        let th = 0.3f64.tanh();
        assert!((adj.get(w) - (1.0 - th * th)).abs() < 1e-15);
    }

    #[test]
    fn powi_and_div_partials() {
        let mut t = Tape::new();
        let x = t.leaf(-1.5, LeafRole::Input).unwrap();
        let c = t.powi(x, 3);
        let adj = t.backward(c).unwrap();
        assert!((adj.get(x) - 3.0 * 2.25).abs() < 1e-14);

        let y = t.leaf(4.0, LeafRole::Input).unwrap();
        let q = t.div(x, y).unwrap();
        let adj = t.backward(q).unwrap();
        assert_eq!(adj.get(x), 0.25);
        assert_eq!(adj.get(y), 1.5 / 16.0);
    }

    #[test]
    fn overflow_surfaces_at_backward() {
        let mut t = Tape::new();
        let x = t.leaf(800.0, LeafRole::Input).unwrap();
        let e = t.exp(x);
        assert_eq!(t.first_non_finite(), Some(e.index()));
        assert!(matches!(
            t.backward(e),
            Err(Error::NonFiniteValue { node }) if node == e.index()
        ));
        assert!(t.apply(Primitive::Exp, &[x]).is_err());
    }

    #[test]
    fn node_ids_increase_and_inputs_precede() {
        let mut t = Tape::new();
        let a = t.constant(0.5);
        let b = t.constant(-0.25);
        let c = t.mul(a, b);
        let d = t.tanh(c);
        let e = t.add(d, a);
        for v in [c, d, e] {
            for i in t.inputs(v) {
                assert!(i < v);
            }
        }
    }

    /// Random expression over {add, mul, sin, tanh, exp} with three leaves.
    #[derive(Debug, Clone)]
    enum Expr {
        Leaf(usize),
        Add(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Sin(Box<Expr>),
        Tanh(Box<Expr>),
        Exp(Box<Expr>),
    }

    impl Expr {
        fn record(&self, t: &mut Tape, leaves: &[Var]) -> Var {
            match self {
                Expr::Leaf(i) => leaves[*i],
                Expr::Add(a, b) => {
                    let (a, b) = (a.record(t, leaves), b.record(t, leaves));
                    t.add(a, b)
                }
                Expr::Mul(a, b) => {
                    let (a, b) = (a.record(t, leaves), b.record(t, leaves));
                    t.mul(a, b)
                }
                Expr::Sin(a) => {
                    let a = a.record(t, leaves);
                    t.sin(a)
                }
                Expr::Tanh(a) => {
                    let a = a.record(t, leaves);
                    t.tanh(a)
                }
                Expr::Exp(a) => {
                    let a = a.record(t, leaves);
                    t.exp(a)
                }
            }
        }

        /// Forward-mode value and derivative along leaf `i`.
        fn dual(&self, x: &[f64], i: usize) -> (f64, f64) {
            match self {
                Expr::Leaf(j) => (x[*j], if *j == i { 1.0 } else { 0.0 }),
                Expr::Add(a, b) => {
                    let ((u, du), (v, dv)) = (a.dual(x, i), b.dual(x, i));
                    (u + v, du + dv)
                }
                Expr::Mul(a, b) => {
                    let ((u, du), (v, dv)) = (a.dual(x, i), b.dual(x, i));
                    (u * v, du * v + u * dv)
                }
                Expr::Sin(a) => {
                    let (u, du) = a.dual(x, i);
                    (u.sin(), u.cos() * du)
                }
                Expr::Tanh(a) => {
                    let (u, du) = a.dual(x, i);
                    let th = u.tanh();
                    (th, (1.0 - th * th) * du)
                }
                Expr::Exp(a) => {
                    let (u, du) = a.dual(x, i);
                    (u.exp(), u.exp() * du)
                }
            }
        }
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = (0usize..3).prop_map(Expr::Leaf);
        leaf.prop_recursive(8, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
                inner.clone().prop_map(|a| Expr::Sin(a.into())),
                inner.clone().prop_map(|a| Expr::Tanh(a.into())),
                inner.prop_map(|a| Expr::Exp(a.into())),
            ]
        })
    }

    fn tape_grad(e: &Expr, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut t = Tape::new();
        let leaves: Vec<Var> = x
            .iter()
            .map(|&v| t.leaf(v, LeafRole::Input).unwrap())
            .collect();
        let out = e.record(&mut t, &leaves);
        let adj = t.backward(out).ok()?;
        Some((leaves.iter().map(|&l| adj.get(l)).collect(), t.value(out)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_forward_mode(
            e in expr(),
            x in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let Some((grad, value)) = tape_grad(&e, &x) else { return Ok(()); };
            prop_assume!(value.abs() < 1e6 && grad.iter().all(|g| g.abs() < 1e6));
            for i in 0..3 {
                let (v, d) = e.dual(&x, i);
                prop_assert!(close(v, value, 1e-14));
                prop_assert!(close(grad[i], d, 1e-10), "leaf {i}: tape {} vs forward {d}", grad[i]);
            }
        }

        #[test]
        fn backward_is_linear(
            f in expr(),
            g in expr(),
            x in proptest::collection::vec(-1.0f64..1.0, 3),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let mut t = Tape::new();
            let leaves: Vec<Var> = x.iter().map(|&v| t.leaf(v, LeafRole::Input).unwrap()).collect();
            let fv = f.record(&mut t, &leaves);
            let gv = g.record(&mut t, &leaves);
            let af = t.scale(fv, a);
            let bg = t.scale(gv, b);
            let combo = t.add(af, bg);
            let (Ok(adj_f), Ok(adj_g), Ok(adj_c)) = (t.backward(fv), t.backward(gv), t.backward(combo)) else {
                return Ok(());
            };
            for &l in &leaves {
                let want = a * adj_f.get(l) + b * adj_g.get(l);
                prop_assert!(close(adj_c.get(l), want, 1e-12));
            }
        }

        #[test]
        fn identical_tapes_identical_adjoints(
            e in expr(),
            x in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let first = tape_grad(&e, &x);
            let second = tape_grad(&e, &x);
            match (first, second) {
                (Some((a, _)), Some((b, _))) => {
                    let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(a, b);
                }
                (None, None) => {}
                _ => prop_assert!(false, "determinism broken"),
            }
        }
    }
}
