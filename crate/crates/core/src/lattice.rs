//! Compressions of the trace (GNS) representation onto lattice boxes.
//!
//! For a lattice `Λ = Zg₁ ⊕ … ⊕ Zgₙ` the trace representation acts on
//! `ℓ²(Λ)` by twisted translations `π(W(f))δ_h = exp(-iσ(f,h)/2) δ_{f+h}`.
//! A box `B ⊂ Λ` gives the c.c.p. map `φ(A) = P_B π(A) P_B` into `M_|B|(C)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::rational::{self, Rational};
use crate::symplectic::{self, SymplecticSpace, VecX};
use crate::weyl::{weyl_phase, WeylElement};

/// Default cap on the number of box points (matrix rows).
pub const DEFAULT_MAX_ROWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxShape {
    /// `{|kᵢ| ≤ N}`
    #[default]
    Symmetric,
    /// `{1 ≤ kᵢ ≤ N}`
    OneSided,
}

impl BoxShape {
    pub fn range(self, radius: u64) -> std::ops::RangeInclusive<i64> {
        let r = radius as i64;
        match self {
            BoxShape::Symmetric => -r..=r,
            BoxShape::OneSided => 1..=r,
        }
    }

    /// Number of lattice points per generator direction.
    pub fn side(self, radius: u64) -> u64 {
        match self {
            BoxShape::Symmetric => 2 * radius + 1,
            BoxShape::OneSided => radius,
        }
    }
}

impl FromStr for BoxShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(BoxShape::Symmetric),
            "onesided" => Ok(BoxShape::OneSided),
            other => Err(Error::Sweep(format!("unknown box mode {other:?} (expected symmetric|onesided)"))),
        }
    }
}

impl fmt::Display for BoxShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxShape::Symmetric => "symmetric",
            BoxShape::OneSided => "onesided",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    space: Arc<SymplecticSpace>,
    gens: Vec<VecX>,
    shape: BoxShape,
    radius: u64,
    points: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    /// `σ(gᵢ, gⱼ)`
    gram: Vec<Vec<Rational>>,
}

impl LatticeModel {
    pub fn new(space: &Arc<SymplecticSpace>, gens: Vec<VecX>, shape: BoxShape, radius: u64) -> Result<Self> {
        Self::with_cap(space, gens, shape, radius, DEFAULT_MAX_ROWS)
    }

    pub fn with_cap(
        space: &Arc<SymplecticSpace>,
        gens: Vec<VecX>,
        shape: BoxShape,
        radius: u64,
        max_rows: usize,
    ) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::EmptyGenerators);
        }
        for g in &gens {
            space.check(g)?;
        }
        if !symplectic::independent(&gens) {
            return Err(Error::DependentGenerators);
        }
        let side = shape.side(radius) as usize;
        let size = side.checked_pow(gens.len() as u32).ok_or(Error::TooLarge {
            what: "lattice box",
            size: usize::MAX,
            cap: max_rows,
        })?;
        if size > max_rows {
            return Err(Error::TooLarge { what: "lattice box", size, cap: max_rows });
        }
        let mut points: Vec<Vec<i64>> = vec![vec![]];
        for _ in &gens {
            points = points
                .into_iter()
                .flat_map(|p| shape.range(radius).map(move |k| [p.clone(), vec![k]].concat()))
                .collect();
        }
        let index = points.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let gram = gens.iter().map(|a| gens.iter().map(|b| space.sigma_unchecked(a, b)).collect()).collect();
        Ok(LatticeModel { space: space.clone(), gens, shape, radius, points, index, gram })
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn gens(&self) -> &[VecX] {
        &self.gens
    }

    pub fn shape(&self) -> BoxShape {
        self.shape
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    /// `k = |B|`.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    pub fn vector(&self, coords: &[i64]) -> VecX {
        VecX::combination(&self.gens, coords)
    }

    /// Integer coordinates of `f` in the lattice basis.
    pub fn coords_of(&self, f: &VecX) -> Result<Vec<i64>> {
        symplectic::integer_span_membership(&self.gens, f)?.ok_or_else(|| Error::NotInLattice(f.to_string()))
    }

    /// Largest `|kᵢ|` over the support of `a`.
    pub fn support_radius(&self, a: &WeylElement) -> Result<u64> {
        let mut r = 0;
        for f in a.support() {
            for k in self.coords_of(f)? {
                r = r.max(k.unsigned_abs());
            }
        }
        Ok(r)
    }

    fn sigma_coords(&self, a: &[i64], b: &[i64]) -> Rational {
        let mut acc = Rational::default();
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                if y != 0 {
                    acc += &self.gram[i][j] * rational::int(x * y);
                }
            }
        }
        acc
    }

    /// `φ(A) = P π(A) P`: entry `(f+h, h)` is `c_f · exp(-iσ(f,h)/2)`.
    pub fn rep_matrix(&self, a: &WeylElement) -> Result<CompressedOp> {
        let k = self.size();
        let mut m = CMatrix::zeros(k, k);
        for (f, coeff) in a.terms() {
            let kf = self.coords_of(f)?;
            for (col, h) in self.points.iter().enumerate() {
                let target: Vec<i64> = h.iter().zip(&kf).map(|(x, y)| x + y).collect();
                if let Some(row) = self.index_of(&target) {
                    let phase: Complex64 = weyl_phase(&self.sigma_coords(&kf, h));
                    m[(row, col)] += coeff * phase;
                }
            }
        }
        Ok(CompressedOp { matrix: m })
    }

    /// `‖φ(AB) − φ(A)φ(B)‖_{2,tr}`.
    pub fn mult_defect(&self, a: &WeylElement, b: &WeylElement) -> Result<f64> {
        let ab = self.rep_matrix(&a.multiply(b)?)?;
        let pa = self.rep_matrix(a)?;
        let pb = self.rep_matrix(b)?;
        linalg::two_norm(&(ab.matrix - pa.matrix * pb.matrix))
    }

    pub fn norm_report(&self, a: &WeylElement) -> Result<NormReport> {
        let rep = self.rep_matrix(a)?;
        Ok(NormReport { compressed_norm: linalg::operator_norm(&rep.matrix), l1_bound: a.l1_bound() })
    }

    /// `tr(φ(A))` with the normalized matrix trace.
    pub fn trace_reproduction(&self, a: &WeylElement) -> Result<Complex64> {
        linalg::normalized_trace(&self.rep_matrix(a)?.matrix)
    }
}

/// `φ(A)` as a `k × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedOp {
    pub matrix: CMatrix,
}

impl CompressedOp {
    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub compressed_norm: f64,
    pub l1_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypertraceResult {
    pub ambient_radius: u64,
    pub trace_norm: f64,
    /// `|c|·|B Δ (B − f)| / |B|` when `A = c·W(f)` is a monomial.
    pub combinatorial_prediction: Option<f64>,
}

/// `‖ρ π(A) − π(A) ρ‖₁` with `ρ = P_B / |B|` for the inner box `B` of radius
/// `inner`, evaluated on the symmetric ambient box of radius `ambient`
/// (default `inner + support radius`).
pub fn hypertrace_commutator(
    space: &Arc<SymplecticSpace>,
    gens: &[VecX],
    shape: BoxShape,
    inner: u64,
    ambient: Option<u64>,
    a: &WeylElement,
) -> Result<HypertraceResult> {
    let inner_model = LatticeModel::new(space, gens.to_vec(), shape, inner)?;
    let r = inner_model.support_radius(a)?;
    let needed = inner + r;
    let ambient = ambient.unwrap_or(needed);
    if ambient < needed {
        return Err(Error::AmbientTooSmall { needed, got: ambient });
    }
    let model = LatticeModel::new(space, gens.to_vec(), BoxShape::Symmetric, ambient)?;
    let pi = model.rep_matrix(a)?.matrix;
    let weight = 1.0 / inner_model.size() as f64;
    let rho: Vec<f64> =
        model.points().iter().map(|p| if inner_model.index_of(p).is_some() { weight } else { 0.0 }).collect();
    let k = model.size();
    let comm = CMatrix::from_fn(k, k, |i, j| pi[(i, j)] * (rho[i] - rho[j]));
    let trace_norm = linalg::trace_norm(&comm);

    let combinatorial_prediction = match a.as_monomial() {
        Some((f, coeff)) => {
            let kf = inner_model.coords_of(f)?;
            Some(coeff.norm() * box_translate_defect(shape, inner, &kf))
        }
        None => None,
    };
    Ok(HypertraceResult { ambient_radius: ambient, trace_norm, combinatorial_prediction })
}

/// `|B Δ (B − f)| / |B|` for a product box, from per-axis overlaps.
pub fn box_translate_defect(shape: BoxShape, radius: u64, shift: &[i64]) -> f64 {
    let side = shape.side(radius) as f64;
    let size = side.powi(shift.len() as i32);
    let overlap: f64 = shift.iter().map(|k| (side - k.unsigned_abs() as f64).max(0.0)).product();
    2.0 * (size - overlap) / size
}
