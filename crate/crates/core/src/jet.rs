//! Truncated Taylor polynomials whose coefficients are tape variables.
//!
//! Coefficient `k` stores `u^(k)(x) / k!`. Pushing a seeded jet through a
//! computation yields every derivative up to the jet order in one pass, and
//! since each coefficient is an ordinary [`Var`] the result stays
//! differentiable with respect to the weights and to the expansion point.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<Var>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl Jet {
    /// Jet of the identity at `x`: coefficients `[x, 1, 0, ..., 0]`.
    pub fn seed(tape: &mut Tape, x: Var, order: usize) -> Jet {
        let mut coeffs = Vec::with_capacity(order + 1);
        coeffs.push(x);
        if order >= 1 {
            coeffs.push(tape.constant(1.0));
        }
        if order >= 2 {
            let zero = tape.constant(0.0);
            coeffs.resize(order + 1, zero);
        }
        Jet { coeffs }
    }

    /// Jet of a quantity that does not vary with the expansion variable.
    pub fn constant_of(tape: &mut Tape, v: Var, order: usize) -> Jet {
        let mut coeffs = Vec::with_capacity(order + 1);
        coeffs.push(v);
        if order >= 1 {
            let zero = tape.constant(0.0);
            coeffs.resize(order + 1, zero);
        }
        Jet { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<Var>) -> Jet {
        assert!(!coeffs.is_empty(), "a jet has at least one coefficient");
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Var] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Var {
        self.coeffs[k]
    }

    pub fn value(&self) -> Var {
        self.coeffs[0]
    }

    pub fn coeff_values(&self, tape: &Tape) -> Vec<f64> {
        self.coeffs.iter().map(|&c| tape.value(c)).collect()
    }

    fn check_order(&self, other: &Jet) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::JetOrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, tape: &mut Tape, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| tape.add(a, b))
            .collect();
        Ok(Jet { coeffs })
    }

    pub fn sub(&self, tape: &mut Tape, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| tape.sub(a, b))
            .collect();
        Ok(Jet { coeffs })
    }

    /// Truncated Cauchy product `c_k = sum_{i+j=k} a_i b_j`.
    pub fn mul(&self, tape: &mut Tape, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        let n = self.coeffs.len();
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = tape.mul(self.coeffs[0], other.coeffs[k]);
            for i in 1..=k {
                let p = tape.mul(self.coeffs[i], other.coeffs[k - i]);
                acc = tape.add(acc, p);
            }
            coeffs.push(acc);
        }
        Ok(Jet { coeffs })
    }

    /// `self * self`, using the symmetry of the Cauchy product.
    pub fn square(&self, tape: &mut Tape) -> Jet {
        let n = self.coeffs.len();
        let coeffs = (0..n).map(|k| self.square_coeff(tape, k)).collect();
        Jet { coeffs }
    }

    /// Coefficient `k` of `self * self`, reading only `coeffs[..=k]`.
    fn square_coeff(&self, tape: &mut Tape, k: usize) -> Var {
        let c = &self.coeffs;
        let mut acc: Option<Var> = None;
        for i in 0..(k + 1) / 2 {
            let p = tape.mul(c[i], c[k - i]);
            acc = Some(match acc {
                Some(a) => tape.add(a, p),
                None => p,
            });
        }
        let cross = acc.map(|a| tape.scale(a, 2.0));
        let diag = (k % 2 == 0).then(|| tape.mul(c[k / 2], c[k / 2]));
        match (cross, diag) {
            (Some(a), Some(b)) => tape.add(a, b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!(),
        }
    }

    /// Integer power by repeated multiplication (`n >= 1`).
    pub fn powi(&self, tape: &mut Tape, n: u32) -> Jet {
        assert!(n >= 1);
        let mut out = self.clone();
        for _ in 1..n {
            out = out.mul(tape, self).expect("equal orders");
        }
        out
    }

    pub fn scale(&self, tape: &mut Tape, c: f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|&a| tape.scale(a, c)).collect(),
        }
    }

    pub fn neg(&self, tape: &mut Tape) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|&a| tape.neg(a)).collect(),
        }
    }

    /// Multiplies every coefficient by the scalar variable `s`.
    pub fn mul_var(&self, tape: &mut Tape, s: Var) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|&a| tape.mul(a, s)).collect(),
        }
    }

    /// Adds a scalar variable to the constant coefficient.
    pub fn add_var(&self, tape: &mut Tape, s: Var) -> Jet {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = tape.add(coeffs[0], s);
        Jet { coeffs }
    }

    pub fn add_const(&self, tape: &mut Tape, c: f64) -> Jet {
        let s = tape.constant(c);
        self.add_var(tape, s)
    }

    /// `sum_{j=1..k} (j z_j) g_{k-j}`, scaled by `sign / k`.
    fn recurrence_term(tape: &mut Tape, jz: &[Var], g: &[Var], k: usize, sign: f64) -> Var {
        let mut acc = tape.mul(jz[1], g[k - 1]);
        for j in 2..=k {
            let p = tape.mul(jz[j], g[k - j]);
            acc = tape.add(acc, p);
        }
        tape.scale(acc, sign / k as f64)
    }

    /// `j * z_j` for `j = 1..=K`; index 0 is unused.
    fn weighted(&self, tape: &mut Tape) -> Vec<Var> {
        let mut jz = Vec::with_capacity(self.coeffs.len());
        jz.push(self.coeffs[0]);
        if self.coeffs.len() > 1 {
            jz.push(self.coeffs[1]);
        }
        for j in 2..self.coeffs.len() {
            jz.push(tape.scale(self.coeffs[j], j as f64));
        }
        jz
    }

    /// tanh through `t' = (1 - t^2) z'`.
    pub fn tanh(&self, tape: &mut Tape) -> Jet {
        let t0 = tape.tanh(self.coeffs[0]);
        if self.coeffs.len() == 1 {
            return Jet { coeffs: vec![t0] };
        }
        let one = tape.constant(1.0);
        let t0sq = tape.mul(t0, t0);
        let s0 = tape.sub(one, t0sq);
        self.tanh_from(tape, t0, s0)
    }

    /// [`Jet::tanh`] given `t0 = tanh(z_0)` and `s0 = 1 - t0^2` already on
    /// the tape, so several jets through the same point can share them.
    pub(crate) fn tanh_from(&self, tape: &mut Tape, t0: Var, s0: Var) -> Jet {
        let n = self.coeffs.len();
        if n == 1 {
            return Jet { coeffs: vec![t0] };
        }
        let jz = self.weighted(tape);
        let mut t = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        t.push(t0);
        s.push(s0);
        for k in 1..n {
            t.push(Self::recurrence_term(tape, &jz, &s, k, 1.0));
            if k + 1 < n {
                let sq = Jet { coeffs: t.clone() }.square_coeff(tape, k);
                s.push(tape.neg(sq));
            }
        }
        Jet { coeffs: t }
    }

    /// Simultaneous sine and cosine jets.
    pub fn sin_cos(&self, tape: &mut Tape) -> (Jet, Jet) {
        let n = self.coeffs.len();
        let mut s = vec![tape.sin(self.coeffs[0])];
        let mut c = vec![tape.cos(self.coeffs[0])];
        if n > 1 {
            let jz = self.weighted(tape);
            for k in 1..n {
                let sk = Self::recurrence_term(tape, &jz, &c, k, 1.0);
                let ck = Self::recurrence_term(tape, &jz, &s, k, -1.0);
                s.push(sk);
                c.push(ck);
            }
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }

    pub fn sin(&self, tape: &mut Tape) -> Jet {
        self.sin_cos(tape).0
    }

    pub fn cos(&self, tape: &mut Tape) -> Jet {
        self.sin_cos(tape).1
    }

    /// exp through `e' = e z'`.
    pub fn exp(&self, tape: &mut Tape) -> Jet {
        let n = self.coeffs.len();
        let mut e = vec![tape.exp(self.coeffs[0])];
        if n > 1 {
            let jz = self.weighted(tape);
            for k in 1..n {
                let ek = Self::recurrence_term(tape, &jz, &e, k, 1.0);
                e.push(ek);
            }
        }
        Jet { coeffs: e }
    }

    /// The `k`-th derivative `k! c_k` as a tape variable.
    pub fn derivative(&self, tape: &mut Tape, k: usize) -> Result<Var> {
        if k > self.order() {
            return Err(Error::JetOrderExceeded {
                requested: k,
                order: self.order(),
            });
        }
        Ok(if k <= 1 {
            self.coeffs[k]
        } else {
            tape.scale(self.coeffs[k], factorial(k))
        })
    }

    /// Jet of the `m`-th derivative, of order `K - m`:
    /// `d_k = (k+m)!/k! c_{k+m}`.
    pub fn shift(&self, tape: &mut Tape, m: usize) -> Result<Jet> {
        if m > self.order() {
            return Err(Error::JetOrderExceeded {
                requested: m,
                order: self.order(),
            });
        }
        if m == 0 {
            return Ok(self.clone());
        }
        let coeffs = (0..=self.order() - m)
            .map(|k| {
                let f = factorial(k + m) / factorial(k);
                tape.scale(self.coeffs[k + m], f)
            })
            .collect();
        Ok(Jet { coeffs })
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Result<Jet> {
        if order > self.order() {
            return Err(Error::JetOrderExceeded {
                requested: order,
                order: self.order(),
            });
        }
        Ok(Jet {
            coeffs: self.coeffs[..=order].to_vec(),
        })
    }

    /// Pads with zero coefficients up to `order` (no-op if already there).
    pub fn lift(&self, tape: &mut Tape, order: usize) -> Jet {
        if order <= self.order() {
            return self.clone();
        }
        let zero = tape.constant(0.0);
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, zero);
        Jet { coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::LeafRole;
    use proptest::prelude::*;

    fn input(t: &mut Tape, v: f64) -> Var {
        t.leaf(v, LeafRole::Input).unwrap()
    }

    fn jet_of(t: &mut Tape, vals: &[f64]) -> Jet {
        Jet::from_coeffs(vals.iter().map(|&v| t.constant(v)).collect())
    }

    fn assert_coeffs(t: &Tape, j: &Jet, want: &[f64], tol: f64) {
        let got = j.coeff_values(t);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn seed_coefficients() {
        let mut t = Tape::new();
        let x = input(&mut t, 2.0);
        let j = Jet::seed(&mut t, x, 3);
        assert_coeffs(&t, &j, &[2.0, 1.0, 0.0, 0.0], 0.0);
        assert_eq!(Jet::seed(&mut t, x, 0).order(), 0);
        let d1 = j.derivative(&mut t, 1).unwrap();
        assert_eq!(t.value(d1), 1.0);
        assert_eq!(j.derivative(&mut t, 0).unwrap(), x);
    }

    #[test]
    fn cauchy_product() {
        let mut t = Tape::new();
        let a = jet_of(&mut t, &[1.0, 2.0, 0.0]);
        let b = jet_of(&mut t, &[3.0, 4.0, 0.0]);
        let c = a.mul(&mut t, &b).unwrap();
        assert_coeffs(&t, &c, &[3.0, 10.0, 8.0], 0.0);

        let zero = jet_of(&mut t, &[0.0, 0.0, 0.0]);
        let same = a.add(&mut t, &zero).unwrap();
        assert_coeffs(&t, &same, &[1.0, 2.0, 0.0], 0.0);

        let s = jet_of(&mut t, &[1.0, 2.0]).scale(&mut t, 2.0);
        assert_coeffs(&t, &s, &[2.0, 4.0], 0.0);

        let sq = a.square(&mut t);
        let prod = a.mul(&mut t, &a).unwrap();
        assert_eq!(sq.coeff_values(&t), prod.coeff_values(&t));
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let mut t = Tape::new();
        let a = jet_of(&mut t, &[1.0, 2.0]);
        let b = jet_of(&mut t, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            a.mul(&mut t, &b),
            Err(Error::JetOrderMismatch { left: 1, right: 2 })
        ));
        assert!(a.add(&mut t, &b).is_err());
        assert!(a.sub(&mut t, &b).is_err());
    }

    #[test]
    fn elementary_series_at_zero() {
        let mut t = Tape::new();
        let x = input(&mut t, 0.0);
        let s3 = Jet::seed(&mut t, x, 3);
        let th = s3.tanh(&mut t);
        assert_coeffs(&t, &th, &[0.0, 1.0, 0.0, -1.0 / 3.0], 1e-15);
        let sn = s3.sin(&mut t);
        assert_coeffs(&t, &sn, &[0.0, 1.0, 0.0, -1.0 / 6.0], 1e-15);
        let s2 = Jet::seed(&mut t, x, 2);
        let e = s2.exp(&mut t);
        assert_coeffs(&t, &e, &[1.0, 1.0, 0.5], 1e-15);
    }

    #[test]
    fn order_zero_matches_scalar_primitives() {
        let mut t = Tape::new();
        let x = input(&mut t, 0.7);
        let j = Jet::seed(&mut t, x, 0);
        for (jet, want) in [
            (j.tanh(&mut t), 0.7f64.tanh()),
            (j.sin(&mut t), 0.7f64.sin()),
            (j.cos(&mut t), 0.7f64.cos()),
            (j.exp(&mut t), 0.7f64.exp()),
        ] {
            assert_eq!(jet.order(), 0);
            assert_eq!(t.value(jet.value()), want);
        }
    }

    #[test]
    fn sin_derivatives_to_order_seven() {
        let mut t = Tape::new();
        let x = input(&mut t, 1.0);
        let j = Jet::seed(&mut t, x, 7).sin(&mut t);
        let (s, c) = 1f64.sin_cos();
        let want = [s, c, -s, -c, s, c, -s, -c];
        for (k, w) in want.iter().enumerate() {
            let d = j.derivative(&mut t, k).unwrap();
            assert!((t.value(d) - w).abs() < 1e-8, "order {k}");
        }
        assert!(matches!(
            j.derivative(&mut t, 8),
            Err(Error::JetOrderExceeded { requested: 8, order: 7 })
        ));
    }

    #[test]
    fn shift_is_termwise_derivative() {
        let mut t = Tape::new();
        let a = jet_of(&mut t, &[5.0, 1.0, 2.0, 3.0]);
        let s = a.shift(&mut t, 1).unwrap();
        assert_coeffs(&t, &s, &[1.0, 4.0, 9.0], 0.0);
        assert_eq!(a.shift(&mut t, 0).unwrap(), a);
        assert!(a.shift(&mut t, 4).is_err());

        let x = input(&mut t, 0.0);
        let u = Jet::seed(&mut t, x, 3).sin(&mut t);
        let d2 = u.shift(&mut t, 2).unwrap();
        assert_coeffs(&t, &d2, &[0.0, -1.0], 1e-15);
    }

    #[test]
    fn gradient_through_derivative_wrt_seed_point() {
        // d/dx of u^(k)(x) must equal u^(k+1)(x) read from a longer jet.
        let f = |t: &mut Tape, j: &Jet| -> Jet {
            let e = j.scale(t, 0.3).exp(t);
            let th = j.tanh(t);
            e.mul(t, &th).unwrap()
        };
        for k in [1usize, 2, 4, 6] {
            let mut t = Tape::new();
            let x = input(&mut t, 0.4);
            let j = Jet::seed(&mut t, x, k);
            let dk = f(&mut t, &j).derivative(&mut t, k).unwrap();
            let grad = t.backward(dk).unwrap().get(x);

            let mut t2 = Tape::new();
            let x2 = input(&mut t2, 0.4);
            let j2 = Jet::seed(&mut t2, x2, k + 1);
            let next = f(&mut t2, &j2).derivative(&mut t2, k + 1).unwrap();
            let want = t2.value(next);
            assert!(
                (grad - want).abs() <= 1e-8 * want.abs().max(1.0),
                "k={k}: {grad} vs {want}"
            );
        }
    }

    /// Analytic derivatives of a polynomial given by its monomial coefficients.
    fn poly_derivative(p: &[f64], x: f64, k: usize) -> f64 {
        let mut total = 0.0;
        for (n, &a) in p.iter().enumerate().skip(k) {
            let falling: f64 = ((n - k + 1)..=n).map(|i| i as f64).product();
            total += a * falling * x.powi((n - k) as i32);
        }
        total
    }

    proptest! {
        #[test]
        fn polynomial_jets_are_exact(
            p in proptest::collection::vec(-2.0f64..2.0, 6),
            x0 in -1.5f64..1.5,
        ) {
            // Horner evaluation in jet arithmetic.
            let mut t = Tape::new();
            let x = input(&mut t, x0);
            let xj = Jet::seed(&mut t, x, 7);
            let lead = t.constant(p[5]);
            let mut acc = Jet::constant_of(&mut t, lead, 7);
            for &a in p[..5].iter().rev() {
                acc = acc.mul(&mut t, &xj).unwrap().add_const(&mut t, a);
            }
            for k in 0..=7 {
                let d = acc.derivative(&mut t, k).unwrap();
                let want = poly_derivative(&p, x0, k);
                let got = t.value(d);
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "k={}: {} vs {}", k, got, want);
            }
        }
    }
}
