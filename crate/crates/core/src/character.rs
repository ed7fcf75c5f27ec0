//! Characters of the abelian quotient of the resolvent algebra by its
//! commutator ideal, `χ_μ(R(λ, f)) = (iλ − μ(f))^{-1}` for a real linear
//! functional `μ`. Values are exact complex rationals, so multiplicativity
//! and the trace property hold with no rounding at all.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cp::{self, CpSample};
use crate::error::{Error, Result};
use crate::fock::{ResolventSymbol, ResolventWord};
use crate::linalg::{self, c};
use crate::rational::{self, Rational};
use crate::symplectic::{SymplecticSpace, VecX};

/// Exact complex number with rational parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QComplex {
    pub re: Rational,
    pub im: Rational,
}

impl QComplex {
    pub fn new(re: Rational, im: Rational) -> Self {
        QComplex { re, im }
    }

    pub fn real(re: Rational) -> Self {
        QComplex { re, im: Rational::zero() }
    }

    pub fn zero() -> Self {
        Self::real(Rational::zero())
    }

    pub fn one() -> Self {
        Self::real(Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        QComplex { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n.is_zero() {
            return Err(Error::ZeroElement);
        }
        Ok(QComplex { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| &acc * self)
    }

    pub fn to_complex64(&self) -> Complex64 {
        c(rational::to_f64(&self.re), rational::to_f64(&self.im))
    }
}

impl fmt::Display for QComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let re = rational::format_rational(&self.re);
        if self.im < Rational::zero() {
            write!(f, "({re}-{}i)", rational::format_rational(&-self.im.clone()))
        } else {
            write!(f, "({re}+{}i)", rational::format_rational(&self.im))
        }
    }
}

impl Serialize for QComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [rational::format_rational(&self.re), rational::format_rational(&self.im)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for QComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [re, im] = <[String; 2]>::deserialize(d)?;
        let parse = |s: &str| rational::parse_rational(s).map_err(serde::de::Error::custom);
        Ok(QComplex { re: parse(&re)?, im: parse(&im)? })
    }
}

impl Add for &QComplex {
    type Output = QComplex;
    fn add(self, o: &QComplex) -> QComplex {
        QComplex { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub for &QComplex {
    type Output = QComplex;
    fn sub(self, o: &QComplex) -> QComplex {
        QComplex { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul for &QComplex {
    type Output = QComplex;
    fn mul(self, o: &QComplex) -> QComplex {
        QComplex { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
}

impl Neg for &QComplex {
    type Output = QComplex;
    fn neg(self) -> QComplex {
        QComplex { re: -self.re.clone(), im: -self.im.clone() }
    }
}

/// `χ_μ` with `μ(f) = ⟨mu, f⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub mu: VecX,
}

impl Character {
    pub fn new(mu: VecX) -> Self {
        Character { mu }
    }

    pub fn mu_of(&self, f: &VecX) -> Result<Rational> {
        if f.len() != self.mu.len() {
            return Err(Error::DimensionMismatch { expected: self.mu.len(), found: f.len() });
        }
        Ok(self.mu.coords().iter().zip(f.coords()).map(|(a, b)| a * b).sum())
    }

    /// `(iλ − μ(f))^{-1} = (−μ(f) − iλ) / (μ(f)² + λ²)`.
    pub fn resolvent(&self, lambda: &Rational, f: &VecX) -> Result<QComplex> {
        if lambda.is_zero() {
            return Err(Error::ZeroLambda);
        }
        QComplex::new(-self.mu_of(f)?, lambda.clone()).inv()
    }

    pub fn symbol_value(&self, s: &ResolventSymbol) -> Result<QComplex> {
        let v = self.resolvent(&s.lambda, &s.f)?;
        Ok(if s.adjoint { v.conj() } else { v })
    }

    pub fn value(&self, word: &ResolventWord) -> Result<QComplex> {
        word.factors.iter().try_fold(QComplex::one(), |acc, s| Ok(&acc * &self.symbol_value(s)?))
    }

    /// `max(|χ(A*A) − χ(A)*χ(A)|, |χ(AA*) − χ(A)χ(A)*|)`, computed exactly.
    pub fn mult_domain_distance(&self, word: &ResolventWord) -> Result<Rational> {
        let a = self.value(word)?;
        let adj = word.adjoint();
        let left = &self.value(&adj.concat(word))? - &(&a.conj() * &a);
        let right = &self.value(&word.concat(&adj))? - &(&a * &a.conj());
        Ok(left.norm_sqr().max(right.norm_sqr()))
    }
}

/// `(iλ − m)^{-1}` in floating point.
pub fn scalar_resolvent(lambda: f64, m: f64) -> Complex64 {
    c(-m, lambda).inv()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarRelation {
    pub relation: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterReport {
    pub relations: Vec<ScalarRelation>,
    /// `|σ(f, g) r(λ, f)² r(ν, g)|`, the term removed by the quotient.
    pub sigma_term: f64,
    /// `|χ(AB) − χ(A)χ(B)|` on the pair, in exact arithmetic.
    pub k1_mult_defect: f64,
    /// The same defect through the floating-point `k = 1` sample.
    pub k1_certificate_defect: f64,
    /// `|tr∘φ(A) − χ(A)|` over the images of the `k = 1` sample.
    pub k1_trace_error: f64,
    pub pass: bool,
}

pub const SCALAR_TOL: f64 = 1e-12;

/// Checks the σ-free scalar relations at `(λ, ν, f, g)` and builds the
/// `k = 1` certificate for the words `R(λ, f)`, `R(ν, g)` and their product.
pub fn character_relation_check(chi: &Character, lambda: f64, nu: f64, f: &VecX, g: &VecX) -> Result<CharacterReport> {
    if lambda == 0.0 || nu == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if lambda + nu == 0.0 {
        return Err(Error::InvalidParam { relation: "product".into(), msg: "lambda + nu must be nonzero".into() });
    }
    let mf = rational::to_f64(&chi.mu_of(f)?);
    let mg = rational::to_f64(&chi.mu_of(g)?);
    let r = scalar_resolvent;
    let (rf, rg) = (r(lambda, mf), r(nu, mg));

    let residuals = [
        ("normalization", (r(lambda, 0.0) - c(0.0, -1.0 / lambda)).norm()),
        ("adjoint", (rf.conj() - r(-lambda, mf)).norm()),
        ("scaling", (r(nu * lambda, nu * mf) * nu - rf).norm()),
        ("resolvent-identity", (rf - r(nu, mf) - c(0.0, nu - lambda) * rf * r(nu, mf)).norm()),
        ("product", (rf * rg - r(lambda + nu, mf + mg) * (rf + rg)).norm()),
    ];
    let relations: Vec<ScalarRelation> = residuals
        .iter()
        .map(|&(id, residual)| ScalarRelation { relation: id.into(), residual, pass: residual <= SCALAR_TOL })
        .collect();

    let dim = f.len();
    if !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch { expected: dim + 1, found: dim });
    }
    let space = SymplecticSpace::standard(dim / 2)?;
    let sigma = rational::to_f64(&space.sigma(f, g)?);
    let sigma_term = (sigma * rf * rf * rg).norm();

    let lam = rational::from_f64(lambda).ok_or(Error::ZeroLambda)?;
    let nu_q = rational::from_f64(nu).ok_or(Error::ZeroLambda)?;
    let a = ResolventWord::symbol(lam, f.clone())?;
    let b = ResolventWord::symbol(nu_q, g.clone())?;
    let sample = k1_sample(chi, &[("A", &a), ("B", &b), ("AB", &a.concat(&b))])?;
    let pairs = [["A".to_string(), "B".to_string(), "AB".to_string()]];
    let cert = cp::folner_certificate(&sample, &pairs, SCALAR_TOL, &Default::default())?;
    let k1_certificate_defect = cert.pairs[0].defect;
    let exact = &chi.value(&a.concat(&b))? - &(&chi.value(&a)? * &chi.value(&b)?);
    let k1_mult_defect = rational::to_f64(&exact.norm_sqr()).sqrt();
    let mut k1_trace_error: f64 = 0.0;
    for (label, word) in [("A", &a), ("B", &b)] {
        let tr = linalg::normalized_trace(sample.image(label)?)?;
        k1_trace_error = k1_trace_error.max((tr - chi.value(word)?.to_complex64()).norm());
    }
    let pass =
        relations.iter().all(|r| r.pass) && cert.verdict && k1_mult_defect == 0.0 && k1_trace_error <= SCALAR_TOL;
    Ok(CharacterReport { relations, sigma_term, k1_mult_defect, k1_certificate_defect, k1_trace_error, pass })
}

/// The character as a one-dimensional c.c.p. (indeed unital *-homomorphic)
/// sample.
pub fn k1_sample(chi: &Character, words: &[(&str, &ResolventWord)]) -> Result<CpSample> {
    let mut sample = CpSample::new(linalg::identity(1));
    for (label, word) in words {
        let v = chi.value(word)?.to_complex64();
        sample.images.insert(label.to_string(), linalg::CMatrix::from_element(1, 1, v));
    }
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        rational::parse_rational(s).unwrap()
    }

    fn word(items: &[(i64, [i64; 2])]) -> ResolventWord {
        ResolventWord::new(
            items.iter().map(|(l, f)| ResolventSymbol::new(rational::int(*l), VecX::from_ints(f)).unwrap()).collect(),
        )
    }

    #[test]
    fn examples() {
        let chi = Character::new(VecX::from_ints(&[2, 0]));
        let v = chi.value(&word(&[(1, [1, 0])])).unwrap();
        assert_eq!(v, QComplex::new(q("-2/5"), q("-1/5")));
        let v = chi.value(&word(&[(3, [0, 0])])).unwrap();
        assert_eq!(v, QComplex::new(q("0"), q("-1/3")));
        assert!(matches!(chi.resolvent(&rational::int(0), &VecX::from_ints(&[1, 0])), Err(Error::ZeroLambda)));
        assert_eq!(chi.value(&ResolventWord::default()).unwrap(), QComplex::one());
    }

    #[test]
    fn adjoint_is_conjugate() {
        let chi = Character::new(VecX::parse(&["1/2", "-3"]).unwrap());
        let w = word(&[(2, [1, 1]), (-1, [0, 1])]);
        assert_eq!(chi.value(&w.adjoint()).unwrap(), chi.value(&w).unwrap().conj());
        assert_eq!(chi.mult_domain_distance(&w).unwrap(), Rational::zero());
    }

    #[test]
    fn scalar_resolvent_identity() {
        for a in [-3.0, -0.5, 0.0, 0.25, 2.0, 7.5] {
            let lhs = scalar_resolvent(1.0, a) - scalar_resolvent(2.0, a);
            let rhs = c(0.0, 1.0) * scalar_resolvent(1.0, a) * scalar_resolvent(2.0, a);
            assert!((lhs - rhs).norm() <= 1e-15);
        }
    }

    #[test]
    fn relation_report() {
        let chi = Character::new(VecX::from_ints(&[1, -2]));
        let report =
            character_relation_check(&chi, 1.0, 0.5, &VecX::from_ints(&[1, 0]), &VecX::from_ints(&[0, 1])).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.relations.len(), 5);
        assert!(report.sigma_term > 0.0);
        assert_eq!(report.k1_mult_defect, 0.0);
        let iso =
            character_relation_check(&chi, 1.0, 2.0, &VecX::from_ints(&[1, 1]), &VecX::from_ints(&[2, 2])).unwrap();
        assert_eq!(iso.sigma_term, 0.0);
        assert!(
            character_relation_check(&chi, 1.0, -1.0, &VecX::from_ints(&[1, 0]), &VecX::from_ints(&[0, 1])).is_err()
        );
    }

    #[test]
    fn qcomplex_display_and_json() {
        let z = QComplex::new(q("1/2"), q("-3"));
        assert_eq!(z.to_string(), "(1/2-3i)");
        let json = serde_json::to_string(&z).unwrap();
        assert_eq!(json, r#"["1/2","-3"]"#);
        assert_eq!(serde_json::from_str::<QComplex>(&json).unwrap(), z);
    }

    fn arb_word() -> impl Strategy<Value = ResolventWord> {
        proptest::collection::vec(
            ((-5i64..=5).prop_filter("nonzero", |l| *l != 0), -3i64..=3, -3i64..=3, any::<bool>()),
            0..4,
        )
        .prop_map(|items| {
            ResolventWord::new(
                items
                    .into_iter()
                    .map(|(l, a, b, adj)| {
                        let s = ResolventSymbol::new(rational::int(l), VecX::from_ints(&[a, b])).unwrap();
                        if adj {
                            s.adjoint()
                        } else {
                            s
                        }
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn multiplicative_and_tracial(a in arb_word(), b in arb_word(), m0 in -4i64..=4, m1 in -4i64..=4) {
            let chi = Character::new(VecX::from_ints(&[m0, m1]));
            let va = chi.value(&a).unwrap();
            let vb = chi.value(&b).unwrap();
            prop_assert_eq!(chi.value(&a.concat(&b)).unwrap(), &va * &vb);
            prop_assert_eq!(chi.value(&a.concat(&b)).unwrap(), chi.value(&b.concat(&a)).unwrap());
            prop_assert!(chi.mult_domain_distance(&a).unwrap().is_zero());
        }
    }
}
