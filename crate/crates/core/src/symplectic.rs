//! Exact rational symplectic spaces `(X, σ)`.
//!
//! Coordinates are `BigRational`, so σ values, lattice membership and
//! support-set cardinalities are exact. Floating point only enters once a
//! phase `exp(-iσ/2)` is materialized.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{self, format_rational, parse_rational, Rational};

/// A vector of `2d` exact rationals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VecX(Vec<Rational>);

impl VecX {
    pub fn new(coords: Vec<Rational>) -> Self {
        VecX(coords)
    }

    pub fn zeros(len: usize) -> Self {
        VecX(vec![Rational::zero(); len])
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        VecX(coords.iter().map(|&c| rational::int(c)).collect())
    }

    /// Parses a list of rational literals such as `["1/2", "0"]`.
    pub fn parse<S: AsRef<str>>(coords: &[S]) -> Result<Self> {
        coords.iter().map(|s| parse_rational(s.as_ref())).collect::<Result<Vec<_>>>().map(VecX)
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &Rational) -> VecX {
        VecX(self.0.iter().map(|c| c * k).collect())
    }

    pub fn scale_int(&self, k: i64) -> VecX {
        self.scale(&rational::int(k))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }

    /// Integer linear combination `Σ kᵢ gᵢ`.
    pub fn combination(gens: &[VecX], coeffs: &[i64]) -> VecX {
        let len = gens.first().map_or(0, VecX::len);
        let mut out = VecX::zeros(len);
        for (g, &k) in gens.iter().zip(coeffs) {
            if k != 0 {
                out = &out + &g.scale_int(k);
            }
        }
        out
    }
}

impl<'a> Add for &'a VecX {
    type Output = VecX;
    fn add(self, rhs: &'a VecX) -> VecX {
        VecX(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub for &'a VecX {
    type Output = VecX;
    fn sub(self, rhs: &'a VecX) -> VecX {
        VecX(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &VecX {
    type Output = VecX;
    fn neg(self) -> VecX {
        VecX(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for VecX {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", format_rational(c))?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for VecX {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VecX{self}")
    }
}

impl Serialize for VecX {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.0.iter().map(format_rational).collect();
        strings.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VecX {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<serde_json::Value> = Vec::deserialize(d)?;
        raw.iter().map(rational_from_json).collect::<Result<Vec<_>>>().map(VecX).map_err(serde::de::Error::custom)
    }
}

/// Accepts `"3/2"` strings or plain JSON numbers.
pub fn rational_from_json(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::InvalidRational(other.to_string())),
    }
}

/// `(X, σ)` with `dim X = 2d`.
#[derive(Clone, PartialEq, Eq)]
pub struct SymplecticSpace {
    d: usize,
    form: Vec<Vec<Rational>>,
    standard: bool,
}

impl SymplecticSpace {
    /// Standard block form `σ(f,g) = Σⱼ fⱼ g_{d+j} − f_{d+j} gⱼ`.
    pub fn standard(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidForm("d must be positive".into()));
        }
        let n = 2 * d;
        let mut form = vec![vec![Rational::zero(); n]; n];
        for j in 0..d {
            form[j][d + j] = rational::int(1);
            form[d + j][j] = rational::int(-1);
        }
        Ok(SymplecticSpace { d, form, standard: true })
    }

    /// A user-supplied form; must be skew-symmetric and non-degenerate.
    pub fn with_form(d: usize, form: Vec<Vec<Rational>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidForm("d must be positive".into()));
        }
        let n = 2 * d;
        if form.len() != n || form.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidForm(format!("form must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                if form[i][j] != -form[j][i].clone() {
                    return Err(Error::InvalidForm(format!("not skew-symmetric at ({i},{j})")));
                }
            }
        }
        if rational::determinant(&form).is_zero() {
            return Err(Error::InvalidForm("degenerate (determinant 0)".into()));
        }
        let standard = SymplecticSpace::standard(d)?.form == form;
        Ok(SymplecticSpace { d, form, standard })
    }

    pub fn dim_pairs(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    pub fn form(&self) -> &[Vec<Rational>] {
        &self.form
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    pub fn check(&self, f: &VecX) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: f.len() });
        }
        Ok(())
    }

    pub fn zero(&self) -> VecX {
        VecX::zeros(self.dim())
    }

    pub fn basis(&self, i: usize) -> VecX {
        let mut v = VecX::zeros(self.dim());
        v.0[i] = rational::int(1);
        v
    }

    /// `fᵀ M g`, exact.
    pub fn sigma(&self, f: &VecX, g: &VecX) -> Result<Rational> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.sigma_unchecked(f, g))
    }

    pub(crate) fn sigma_unchecked(&self, f: &VecX, g: &VecX) -> Rational {
        let (f, g) = (&f.0, &g.0);
        let mut acc = Rational::zero();
        if self.standard {
            let d = self.d;
            for j in 0..d {
                acc += &f[j] * &g[d + j] - &f[d + j] * &g[j];
            }
        } else {
            for (i, row) in self.form.iter().enumerate() {
                if f[i].is_zero() {
                    continue;
                }
                for (j, m) in row.iter().enumerate() {
                    if !m.is_zero() && !g[j].is_zero() {
                        acc += &f[i] * m * &g[j];
                    }
                }
            }
        }
        acc
    }
}

impl fmt::Debug for SymplecticSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.standard {
            write!(f, "SymplecticSpace(d={}, standard)", self.d)
        } else {
            write!(f, "SymplecticSpace(d={}, custom)", self.d)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    form: Option<Vec<Vec<serde_json::Value>>>,
}

impl Serialize for SymplecticSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let form = (!self.standard).then(|| {
            self.form
                .iter()
                .map(|row| row.iter().map(|c| serde_json::Value::String(format_rational(c))).collect())
                .collect()
        });
        SpaceJson { d: self.d, form }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymplecticSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceJson::deserialize(d)?;
        let built = match raw.form {
            None => SymplecticSpace::standard(raw.d),
            Some(rows) => rows
                .iter()
                .map(|row| row.iter().map(rational_from_json).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
                .and_then(|form| SymplecticSpace::with_form(raw.d, form)),
        };
        built.map_err(serde::de::Error::custom)
    }
}

/// Integer coefficients `k` with `Σ kᵢ gᵢ = f`.
///
/// Returns `Ok(None)` when `f` is outside the integer span, and
/// [`Error::DependentGenerators`] when the generators are linearly dependent
/// (for rational vectors, Z-dependence and Q-dependence coincide).
pub fn integer_span_membership(gens: &[VecX], f: &VecX) -> Result<Option<Vec<i64>>> {
    let Some(first) = gens.first() else {
        return Err(Error::EmptyGenerators);
    };
    let dim = first.len();
    for g in gens.iter().chain(std::iter::once(f)) {
        if g.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.len() });
        }
    }
    let n = gens.len();
    // augmented system: rows are coordinates, columns are generators | f
    let mut m: Vec<Vec<Rational>> = (0..dim)
        .map(|r| gens.iter().map(|g| g.0[r].clone()).chain(std::iter::once(f.0[r].clone())).collect())
        .collect();
    let pivots = rational::rref(&mut m);
    let gen_rank = pivots.iter().filter(|&&c| c < n).count();
    if gen_rank < n {
        return Err(Error::DependentGenerators);
    }
    if pivots.contains(&n) {
        return Ok(None);
    }
    let mut coeffs = Vec::with_capacity(n);
    for (row, &col) in pivots.iter().enumerate() {
        debug_assert_eq!(row, col);
        let c = &m[row][n];
        if !c.is_integer() {
            return Ok(None);
        }
        let k: &BigInt = c.numer();
        match k.to_i64() {
            Some(k) => coeffs.push(k),
            None => return Ok(None),
        }
    }
    Ok(Some(coeffs))
}

/// True when the generators are linearly independent over Q.
pub fn independent(gens: &[VecX]) -> bool {
    let rows: Vec<Vec<Rational>> = gens.iter().map(|g| g.0.clone()).collect();
    rational::rank(&rows) == gens.len()
}
