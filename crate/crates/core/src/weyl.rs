//! The Weyl *-algebra `𝒲₀(X, σ)` in its canonical basis of Weyl generators.
//!
//! Products follow `W(f)W(g) = exp(-iσ(f,g)/2) W(f+g)`, the involution is
//! `W(f)* = W(-f)`, and the trace keeps the coefficient of `W(0)`.
//! Supports are exact (keys are [`VecX`]); coefficients are `f64` complex.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::symplectic::{SymplecticSpace, VecX};

/// Coefficients with modulus below this are dropped after every operation.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-14;

/// `exp(-iσ/2)` for an exact σ.
pub fn weyl_phase(sigma: &Rational) -> Complex64 {
    Complex64::from_polar(1.0, -0.5 * rational::to_f64(sigma))
}

#[derive(Clone)]
pub struct WeylElement {
    space: Arc<SymplecticSpace>,
    terms: BTreeMap<VecX, Complex64>,
    prune_tol: f64,
}

impl WeylElement {
    pub fn zero(space: &Arc<SymplecticSpace>) -> Self {
        WeylElement { space: space.clone(), terms: BTreeMap::new(), prune_tol: DEFAULT_PRUNE_TOL }
    }

    /// `W(0)`.
    pub fn unit(space: &Arc<SymplecticSpace>) -> Self {
        Self::scalar(space, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(space: &Arc<SymplecticSpace>, c: Complex64) -> Self {
        let mut out = Self::zero(space);
        out.insert(space.zero(), c);
        out
    }

    /// The Weyl generator `W(f)`.
    pub fn generator(space: &Arc<SymplecticSpace>, f: VecX) -> Result<Self> {
        space.check(&f)?;
        let mut out = Self::zero(space);
        out.terms.insert(f, Complex64::new(1.0, 0.0));
        Ok(out)
    }

    /// Builds `Σ cᵢ W(fᵢ)`, merging repeated vectors.
    pub fn from_terms<I>(space: &Arc<SymplecticSpace>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (VecX, Complex64)>,
    {
        let mut out = Self::zero(space);
        for (f, c) in terms {
            space.check(&f)?;
            out.insert(f, c);
        }
        out.prune();
        Ok(out)
    }

    pub fn with_prune_tol(mut self, tol: f64) -> Self {
        self.prune_tol = tol;
        self.prune();
        self
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn prune_tol(&self) -> f64 {
        self.prune_tol
    }

    pub fn terms(&self) -> &BTreeMap<VecX, Complex64> {
        &self.terms
    }

    pub fn support(&self) -> impl Iterator<Item = &VecX> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coeff(&self, f: &VecX) -> Complex64 {
        self.terms.get(f).copied().unwrap_or_default()
    }

    /// A single term `c·W(f)` (or zero) is a monomial.
    pub fn as_monomial(&self) -> Option<(&VecX, Complex64)> {
        match self.terms.len() {
            1 => self.terms.iter().next().map(|(f, c)| (f, *c)),
            _ => None,
        }
    }

    fn insert(&mut self, f: VecX, c: Complex64) {
        *self.terms.entry(f).or_default() += c;
    }

    fn prune(&mut self) {
        let tol = self.prune_tol;
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    fn same_space(&self, other: &WeylElement) -> Result<()> {
        if self.space.dim() != other.space.dim() {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: other.space.dim() });
        }
        if self.space.form() != other.space.form() {
            return Err(Error::InvalidForm("elements live in different symplectic spaces".into()));
        }
        Ok(())
    }

    fn combined_tol(&self, other: &WeylElement) -> f64 {
        self.prune_tol.min(other.prune_tol)
    }

    pub fn add(&self, other: &WeylElement) -> Result<WeylElement> {
        self.same_space(other)?;
        let mut out = self.clone();
        out.prune_tol = self.combined_tol(other);
        for (f, c) in &other.terms {
            out.insert(f.clone(), *c);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &WeylElement) -> Result<WeylElement> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> WeylElement {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune();
        out
    }

    /// Bilinear extension of `W(f)W(g) = exp(-iσ(f,g)/2) W(f+g)`.
    pub fn multiply(&self, other: &WeylElement) -> Result<WeylElement> {
        self.same_space(other)?;
        let mut out = WeylElement::zero(&self.space);
        out.prune_tol = self.combined_tol(other);
        for (f, a) in &self.terms {
            for (g, b) in &other.terms {
                let phase = weyl_phase(&self.space.sigma_unchecked(f, g));
                out.insert(f + g, a * b * phase);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<WeylElement> {
        let mut out = WeylElement::unit(&self.space);
        out.prune_tol = self.prune_tol;
        for _ in 0..n {
            out = out.multiply(self)?;
        }
        Ok(out)
    }

    /// `a·W(f) ↦ conj(a)·W(-f)`.
    pub fn adjoint(&self) -> WeylElement {
        WeylElement {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(f, c)| (-f, c.conj())).collect(),
            prune_tol: self.prune_tol,
        }
    }

    /// The tracial state: the coefficient of `W(0)`.
    pub fn trace(&self) -> Complex64 {
        self.coeff(&self.space.zero())
    }

    /// `Σ |cᵢ|`, an upper bound for the C*-norm since every `W(f)` is unitary.
    pub fn l1_bound(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficient-wise deviation from `other`.
    pub fn max_coeff_diff(&self, other: &WeylElement) -> f64 {
        let mut worst: f64 = 0.0;
        for (f, c) in &self.terms {
            worst = worst.max((c - other.coeff(f)).norm());
        }
        for (f, c) in &other.terms {
            if !self.terms.contains_key(f) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

impl fmt::Debug for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for WeylElement {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(fm, "0");
        }
        for (i, (v, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(fm, " + ")?;
            }
            write!(fm, "({}{:+}i)*W{}", c.re, c.im, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(d: usize) -> Arc<SymplecticSpace> {
        Arc::new(SymplecticSpace::standard(d).unwrap())
    }

    fn w(s: &Arc<SymplecticSpace>, v: &[i64]) -> WeylElement {
        WeylElement::generator(s, VecX::from_ints(v)).unwrap()
    }

    #[test]
    fn generator_examples() {
        let s = space(1);
        let unit = w(&s, &[0, 0]);
        assert_eq!(unit.trace(), Complex64::new(1.0, 0.0));
        assert_eq!(unit.len(), 1);
        let third = WeylElement::generator(&s, VecX::parse(&["1/3", "0"]).unwrap()).unwrap();
        assert_eq!(third.support().next().unwrap().to_string(), "[1/3,0]");
        assert!(WeylElement::generator(&s, VecX::from_ints(&[1])).is_err());
    }

    #[test]
    fn weyl_product_phase() {
        let s = space(1);
        let p = w(&s, &[1, 0]).multiply(&w(&s, &[0, 1])).unwrap();
        let expected = Complex64::from_polar(1.0, -0.5);
        assert_eq!(p.len(), 1);
        assert!((p.coeff(&VecX::from_ints(&[1, 1])) - expected).norm() < 1e-15);
    }

    #[test]
    fn inverse_and_unit() {
        let s = space(1);
        let f = w(&s, &[2, -1]);
        let p = f.multiply(&w(&s, &[-2, 1])).unwrap();
        assert!(p.max_coeff_diff(&WeylElement::unit(&s)) < 1e-15);
        let sum = w(&s, &[1, 0]).add(&w(&s, &[0, 1])).unwrap();
        let q = sum.multiply(&WeylElement::unit(&s)).unwrap();
        assert_eq!(q.max_coeff_diff(&sum), 0.0);
    }

    #[test]
    fn adjoint_examples() {
        let s = space(1);
        let a = w(&s, &[1, 2]).adjoint();
        assert_eq!(a.coeff(&VecX::from_ints(&[-1, -2])), Complex64::new(1.0, 0.0));
        let iu = WeylElement::scalar(&s, Complex64::new(0.0, 1.0)).adjoint();
        assert_eq!(iu.trace(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn trace_and_l1() {
        let s = space(1);
        assert_eq!(w(&s, &[1, 0]).trace(), Complex64::default());
        assert_eq!(w(&s, &[1, 0]).l1_bound(), 1.0);
        let e = w(&s, &[1, 0])
            .scale(Complex64::new(2.0, 0.0))
            .sub(&w(&s, &[0, 1]).scale(Complex64::new(0.0, 3.0)))
            .unwrap();
        assert!((e.l1_bound() - 5.0).abs() < 1e-15);
        assert_eq!(WeylElement::unit(&s).l1_bound(), 1.0);
    }

    #[test]
    fn cancellation_prunes() {
        let s = space(1);
        let a = w(&s, &[1, 0]);
        assert!(a.sub(&a).unwrap().is_zero());
    }

    #[test]
    fn trace_vanishes_off_identity_via_conjugation() {
        // W(g) W(f) W(g)* = exp(-iσ(g,f)) W(f): a trace with τ(W(f)) ≠ 0 would
        // contradict the trace property whenever σ(g,f) ∉ 2πZ.
        let s = space(1);
        let f = w(&s, &[1, 0]);
        let g = w(&s, &[0, 1]);
        let conj = g.multiply(&f).unwrap().multiply(&g.adjoint()).unwrap();
        let sigma = s.sigma(&VecX::from_ints(&[0, 1]), &VecX::from_ints(&[1, 0])).unwrap();
        assert_eq!(sigma, crate::rational::int(-1));
        let expected = f.scale(Complex64::from_polar(1.0, 1.0));
        assert!(conj.max_coeff_diff(&expected) < 1e-15);
        assert_eq!(f.trace(), Complex64::default());
    }

    fn element(len: usize) -> impl Strategy<Value = Vec<(i64, i64, f64, f64)>> {
        proptest::collection::vec((-3i64..=3, -3i64..=3, -1.0..1.0f64, -1.0..1.0f64), 1..=len)
    }

    fn build(s: &Arc<SymplecticSpace>, raw: &[(i64, i64, f64, f64)]) -> WeylElement {
        WeylElement::from_terms(s, raw.iter().map(|&(a, b, re, im)| (VecX::from_ints(&[a, b]), Complex64::new(re, im))))
            .unwrap()
    }

    proptest! {
        #[test]
        fn trace_is_tracial(a in element(3), b in element(3)) {
            let s = space(1);
            let (a, b) = (build(&s, &a), build(&s, &b));
            let ab = a.multiply(&b).unwrap().trace();
            let ba = b.multiply(&a).unwrap().trace();
            prop_assert!((ab - ba).norm() < 1e-12);
        }

        #[test]
        fn trace_is_positive(a in element(4)) {
            let s = space(1);
            let a = build(&s, &a);
            let t = a.adjoint().multiply(&a).unwrap().trace();
            prop_assert!(t.re >= -1e-12 && t.im.abs() < 1e-12);
        }

        #[test]
        fn involution(a in element(4)) {
            let s = space(1);
            let a = build(&s, &a);
            prop_assert_eq!(a.adjoint().adjoint().max_coeff_diff(&a), 0.0);
        }
    }
}
