//! Følner subspaces `V = span{W(k₁g₁ + … + kₙgₙ) : kᵢ ∈ {1..N}}` and the
//! dimension ratios `dim(AV + V) / dim(V)`.
//!
//! Distinct Weyl generators are linearly independent, so for monomials the
//! dimensions are support cardinalities and the ratio is an exact rational.
//! General elements get a support bracket plus a floating-point rank.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::rational::{self, Rational};
use crate::symplectic::VecX;
use crate::weyl::{weyl_phase, WeylElement};

/// Singular values above this count towards the numeric rank.
pub const RANK_TOL: f64 = 1e-9;

/// Upper limit on `Nⁿ` lattice sums enumerated for a subspace.
pub const MAX_SUPPORT: usize = 5_000_000;

/// Upper limit on matrix entries for the numeric rank of a general element.
pub const MAX_RANK_ENTRIES: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct FolnerSubspace {
    gens: Vec<VecX>,
    box_size: u64,
    support: BTreeSet<VecX>,
    injective: bool,
}

impl FolnerSubspace {
    /// Enumerates `S = {Σ kᵢgᵢ : kᵢ ∈ {1..N}}` with exact deduplication.
    pub fn build(gens: &[VecX], box_size: u64) -> Result<Self> {
        let Some(first) = gens.first() else {
            return Err(Error::EmptyGenerators);
        };
        if box_size == 0 {
            return Err(Error::InvalidEpsilon("box size N must be positive".into()));
        }
        for g in gens {
            if g.len() != first.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), found: g.len() });
            }
        }
        let full = BigInt::from(box_size).pow(gens.len() as u32);
        let full_count = full.to_usize().filter(|&c| c <= MAX_SUPPORT).ok_or(Error::TooLarge {
            what: "Følner support",
            size: full.to_usize().unwrap_or(usize::MAX),
            cap: MAX_SUPPORT,
        })?;

        let mut support = BTreeSet::new();
        support.insert(VecX::zeros(first.len()));
        for g in gens {
            let steps: Vec<VecX> = (1..=box_size as i64).map(|k| g.scale_int(k)).collect();
            let mut next = BTreeSet::new();
            for s in &support {
                for step in &steps {
                    next.insert(s + step);
                }
            }
            support = next;
        }
        let injective = support.len() == full_count;
        Ok(FolnerSubspace { gens: gens.to_vec(), box_size, support, injective })
    }

    pub fn gens(&self) -> &[VecX] {
        &self.gens
    }

    pub fn box_size(&self) -> u64 {
        self.box_size
    }

    pub fn support(&self) -> &BTreeSet<VecX> {
        &self.support
    }

    /// `dim V = |S|`.
    pub fn dim(&self) -> usize {
        self.support.len()
    }

    /// Whether `(k₁..kₙ) ↦ Σkᵢgᵢ` is injective on `{1..N}ⁿ`, i.e. `|S| = Nⁿ`.
    pub fn is_injective(&self) -> bool {
        self.injective
    }

    fn check(&self, g: &VecX) -> Result<()> {
        let dim = self.gens[0].len();
        if g.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.len() });
        }
        Ok(())
    }

    /// `|S ∪ (g + S)| / |S|`, exact. Valid for any scalar multiple of `W(g)`.
    pub fn ratio_monomial(&self, g: &VecX) -> Result<Rational> {
        self.check(g)?;
        let new = self.support.iter().filter(|s| !self.support.contains(&(g + *s))).count();
        Ok(Rational::new(BigInt::from(self.dim() + new), BigInt::from(self.dim())))
    }

    /// Bracket and numeric value of `dim(AV + V) / dim(V)` for a general element.
    pub fn ratio_general(&self, a: &WeylElement) -> Result<GeneralRatio> {
        if a.is_zero() {
            return Err(Error::ZeroElement);
        }
        for f in a.support() {
            self.check(f)?;
        }
        let space = a.space();
        // coordinates of AV that fall outside S, indexed deterministically
        let mut outside: BTreeMap<VecX, usize> = BTreeMap::new();
        for f in a.support() {
            for s in &self.support {
                let t = f + s;
                if !self.support.contains(&t) {
                    let next = outside.len();
                    outside.entry(t).or_insert(next);
                }
            }
        }
        let dim = self.dim();
        let upper = Rational::new(BigInt::from(dim + outside.len()), BigInt::from(dim));

        // The W(s) columns span exactly the S coordinates, so
        // rank([A·W(s) | W(s)]) = |S| + rank of the A·W(s) block restricted to
        // the coordinates outside S.
        let rows = outside.len();
        let extra = if rows == 0 {
            0
        } else {
            let entries = rows.saturating_mul(dim);
            if entries > MAX_RANK_ENTRIES {
                return Err(Error::TooLarge { what: "rank matrix", size: entries, cap: MAX_RANK_ENTRIES });
            }
            let mut m = CMatrix::zeros(rows, dim);
            for (col, s) in self.support.iter().enumerate() {
                for (f, coeff) in a.terms() {
                    let t = f + s;
                    if let Some(&row) = outside.get(&t) {
                        let phase: Complex64 = weyl_phase(&space.sigma_unchecked(f, s));
                        m[(row, col)] += coeff * phase;
                    }
                }
            }
            linalg::rank(&m, RANK_TOL)
        };
        Ok(GeneralRatio { lower: Rational::one(), upper, numeric: (dim + extra) as f64 / dim as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralRatio {
    #[serde(serialize_with = "ser_rational")]
    pub lower: Rational,
    pub numeric: f64,
    #[serde(serialize_with = "ser_rational")]
    pub upper: Rational,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format_rational(r))
}

/// Least `N` with `1 + 1/N < 1 + ε`, i.e. `floor(1/ε) + 1`.
pub fn epsilon_plan(eps: &Rational) -> Result<u64> {
    if !eps.is_positive() {
        return Err(Error::InvalidEpsilon(format!("eps must be positive, got {}", rational::format_rational(eps))));
    }
    let n = eps.recip().floor() + Rational::one();
    n.to_integer().to_u64().filter(|n| !n.is_zero()).ok_or_else(|| Error::InvalidEpsilon("eps too small".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::SymplecticSpace;
    use std::sync::Arc;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    /// Independent oracle: enumerate all tuples and deduplicate with a Vec.
    fn brute_support(gens: &[VecX], n: i64) -> Vec<VecX> {
        let mut tuples: Vec<Vec<i64>> = vec![vec![]];
        for _ in gens {
            tuples = tuples.into_iter().flat_map(|t| (1..=n).map(move |k| [t.clone(), vec![k]].concat())).collect();
        }
        let mut out: Vec<VecX> = tuples.iter().map(|t| VecX::combination(gens, t)).collect();
        out.sort();
        out.dedup();
        out
    }

    #[test]
    fn one_generator_box() {
        let v = FolnerSubspace::build(&[VecX::from_ints(&[1, 0])], 4).unwrap();
        let expected: Vec<VecX> = (1..=4).map(|k| VecX::from_ints(&[k, 0])).collect();
        assert_eq!(v.support().iter().cloned().collect::<Vec<_>>(), expected);
        assert!(v.is_injective());
    }

    #[test]
    fn two_generators_box() {
        let v = FolnerSubspace::build(&[VecX::from_ints(&[1, 0]), VecX::from_ints(&[0, 1])], 3).unwrap();
        assert_eq!(v.dim(), 9);
    }

    #[test]
    fn dependent_generators_collide() {
        let gens = [VecX::from_ints(&[1, 0]), VecX::from_ints(&[2, 0])];
        let v2 = FolnerSubspace::build(&gens, 2).unwrap();
        let expected: Vec<VecX> = (3..=6).map(|k| VecX::from_ints(&[k, 0])).collect();
        assert_eq!(v2.support().iter().cloned().collect::<Vec<_>>(), expected);
        assert!(v2.is_injective());
        let v3 = FolnerSubspace::build(&gens, 3).unwrap();
        assert_eq!(v3.support().iter().cloned().collect::<Vec<_>>(), brute_support(&gens, 3));
        assert_eq!(v3.dim(), 7);
        assert!(!v3.is_injective());
    }

    #[test]
    fn empty_generators_rejected() {
        assert!(matches!(FolnerSubspace::build(&[], 3), Err(Error::EmptyGenerators)));
    }

    #[test]
    fn monomial_ratios() {
        let gens = [VecX::from_ints(&[1, 0]), VecX::from_ints(&[0, 1])];
        for n in [1u64, 2, 5, 7] {
            let v = FolnerSubspace::build(&gens, n).unwrap();
            assert_eq!(v.ratio_monomial(&gens[0]).unwrap(), q(n as i64 + 1, n as i64));
            assert_eq!(v.ratio_monomial(&VecX::zeros(2)).unwrap(), q(1, 1));
        }
        let v = FolnerSubspace::build(&[VecX::from_ints(&[1, 0])], 5).unwrap();
        assert_eq!(v.ratio_monomial(&VecX::from_ints(&[1, 0])).unwrap(), q(6, 5));
        // a translate disjoint from S doubles the support
        assert_eq!(v.ratio_monomial(&VecX::from_ints(&[0, 1])).unwrap(), q(2, 1));
    }

    #[test]
    fn general_ratio_examples() {
        let space = Arc::new(SymplecticSpace::standard(1).unwrap());
        let g = VecX::from_ints(&[1, 0]);
        let v = FolnerSubspace::build(std::slice::from_ref(&g), 5).unwrap();

        let mono = WeylElement::generator(&space, g.clone()).unwrap();
        let r = v.ratio_general(&mono).unwrap();
        assert_eq!(r.lower, q(1, 1));
        assert_eq!(r.upper, q(6, 5));
        assert!((r.numeric - 1.2).abs() < 1e-15);

        let unit = WeylElement::unit(&space);
        let r = v.ratio_general(&unit).unwrap();
        assert_eq!((r.lower.clone(), r.upper.clone(), r.numeric), (q(1, 1), q(1, 1), 1.0));

        // A = W(g) + W(2g): columns W(s+1) + W(s+2) add e6 + e7 and e5 + e6,
        // so the span covers all 7 support points.
        let a = mono.add(&WeylElement::generator(&space, g.scale_int(2)).unwrap()).unwrap();
        let r = v.ratio_general(&a).unwrap();
        assert_eq!(r.upper, q(7, 5));
        assert!((r.numeric - 1.4).abs() < 1e-15);

        assert!(matches!(v.ratio_general(&WeylElement::zero(&space)), Err(Error::ZeroElement)));
    }

    #[test]
    fn general_ratio_within_bracket() {
        let space = Arc::new(SymplecticSpace::standard(1).unwrap());
        let g = VecX::from_ints(&[1, 0]);
        let h = VecX::from_ints(&[0, 1]);
        let v = FolnerSubspace::build(&[g.clone(), h.clone()], 3).unwrap();
        let a = WeylElement::generator(&space, g.clone())
            .unwrap()
            .add(&WeylElement::generator(&space, h.clone()).unwrap())
            .unwrap();
        let r = v.ratio_general(&a).unwrap();
        assert!(rational::to_f64(&r.lower) <= r.numeric);
        assert!(r.numeric <= rational::to_f64(&r.upper) + 1e-6);
    }

    #[test]
    fn epsilon_plan_examples() {
        assert_eq!(epsilon_plan(&q(1, 2)).unwrap(), 3);
        assert_eq!(epsilon_plan(&q(1, 1)).unwrap(), 2);
        assert_eq!(epsilon_plan(&q(1, 100)).unwrap(), 101);
        assert_eq!(epsilon_plan(&q(1, 10)).unwrap(), 11);
        assert!(epsilon_plan(&q(0, 1)).is_err());
        assert!(epsilon_plan(&q(-1, 2)).is_err());
    }
}
