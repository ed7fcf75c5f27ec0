//! Truncated Fock representations of the fields and their resolvents.
//!
//! Each of the `d` modes is cut to the levels `0..M`, so the total dimension
//! is `M^d`. With `Q_j = (a_j + a_j†)/√2` and `P_j = (a_j − a_j†)/(i√2)` the
//! field is `Φ(f) = Σ_j f_j Q_j + f_{d+j} P_j`, which gives
//! `[Φ(f), Φ(g)] = iσ(f, g)` below the top level and
//! `R(λ, f) = (iλ − Φ(f))^{-1}`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::rational::{self, Rational};
use crate::symplectic::{SymplecticSpace, VecX};

/// Upper limit on `M^d`.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone)]
pub struct FockRep {
    modes: usize,
    levels: usize,
    dim: usize,
    /// `Q_1..Q_d, P_1..P_d`, so `Φ(f) = Σ_i f_i quadratures[i]`.
    quadratures: Vec<CMatrix>,
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

impl FockRep {
    pub fn new(modes: usize, levels: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParam { relation: "fock".into(), msg: "at least one mode is required".into() });
        }
        if levels == 0 {
            return Err(Error::InvalidParam { relation: "fock".into(), msg: "at least one level is required".into() });
        }
        let dim = levels.saturating_pow(modes.try_into().unwrap_or(u32::MAX));
        if dim > MAX_DIM {
            return Err(Error::TooLarge { what: "Fock space dimension", size: dim, cap: MAX_DIM });
        }

        let mut a = CMatrix::zeros(levels, levels);
        for n in 1..levels {
            a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
        }
        let a_dag = a.adjoint();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = (&a + &a_dag) * c(s, 0.0);
        let p = (&a - &a_dag) * c(0.0, -s);

        let id = linalg::identity(levels);
        let embed = |op: &CMatrix, j: usize| {
            let mut out = linalg::identity(1);
            for mode in 0..modes {
                out = kron(&out, if mode == j { op } else { &id });
            }
            out
        };
        let mut quadratures: Vec<CMatrix> = (0..modes).map(|j| embed(&q, j)).collect();
        quadratures.extend((0..modes).map(|j| embed(&p, j)));
        Ok(FockRep { modes, levels, dim, quadratures })
    }

    /// Single-field representation for a space; the form must be standard.
    pub fn for_space(space: &SymplecticSpace, levels: usize) -> Result<Self> {
        if !space.is_standard() {
            return Err(Error::InvalidForm("the Fock fields realise the standard symplectic form only".into()));
        }
        Self::new(space.dim_pairs(), levels)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self, j: usize) -> &CMatrix {
        &self.quadratures[j]
    }

    pub fn p(&self, j: usize) -> &CMatrix {
        &self.quadratures[self.modes + j]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != 2 * self.modes {
            return Err(Error::DimensionMismatch { expected: 2 * self.modes, found: len });
        }
        Ok(())
    }

    pub fn field(&self, f: &VecX) -> Result<CMatrix> {
        self.field_f64(&f.to_f64())
    }

    pub fn field_f64(&self, f: &[f64]) -> Result<CMatrix> {
        self.check_len(f.len())?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (coef, op) in f.iter().zip(&self.quadratures) {
            if *coef != 0.0 {
                out += op * c(*coef, 0.0);
            }
        }
        Ok(out)
    }

    pub fn resolvent_matrix(&self, lambda: f64, f: &VecX) -> Result<CMatrix> {
        resolvent_of_field(lambda, &self.field(f)?)
    }

    /// Indices of basis states with every mode below `cutoff`.
    pub fn low_levels(&self, cutoff: usize) -> Result<Vec<usize>> {
        if cutoff > self.levels {
            return Err(Error::CutoffTooLarge { cutoff, limit: self.levels });
        }
        Ok((0..self.dim)
            .filter(|&idx| {
                let mut rest = idx;
                (0..self.modes).all(|_| {
                    let level = rest % self.levels;
                    rest /= self.levels;
                    level < cutoff
                })
            })
            .collect())
    }

    /// `‖P_K X P_K‖` with `P_K` the lowest `cutoff` levels of every mode.
    pub fn compressed_norm(&self, m: &CMatrix, cutoff: usize) -> Result<f64> {
        let idx = self.low_levels(cutoff)?;
        let block = m.select_rows(&idx).select_columns(&idx);
        Ok(linalg::operator_norm(&block))
    }

    /// `‖P_K([Q, P] − i)P_K‖` for a single mode.
    pub fn ccr_check(&self, cutoff: usize) -> Result<f64> {
        if self.modes != 1 {
            return Err(Error::InvalidParam { relation: "ccr".into(), msg: "the check is per mode (d = 1)".into() });
        }
        let (q, p) = (self.q(0), self.p(0));
        let defect = q * p - p * q - linalg::identity(self.dim) * c(0.0, 1.0);
        self.compressed_norm(&defect, cutoff)
    }

    /// `‖P_K([Φ(f), Φ(g)] − iσ(f, g))P_K‖`.
    pub fn field_commutator_residual(&self, space: &SymplecticSpace, f: &VecX, g: &VecX, cutoff: usize) -> Result<f64> {
        let sigma = rational::to_f64(&space.sigma(f, g)?);
        let (pf, pg) = (self.field(f)?, self.field(g)?);
        let defect = &pf * &pg - &pg * &pf - linalg::identity(self.dim) * c(0.0, sigma);
        self.compressed_norm(&defect, cutoff)
    }

    /// LHS − RHS of one resolvent relation.
    pub fn relation_difference(&self, relation: Relation, params: &RelationParams) -> Result<CMatrix> {
        let id = relation.id();
        let dim = self.dim;
        let zero_check = |name: &str, v: f64| {
            if v == 0.0 {
                Err(Error::InvalidParam { relation: id.into(), msg: format!("{name} must be nonzero") })
            } else {
                Ok(v)
            }
        };
        let lambda = zero_check("lambda", params.require_lambda(id)?)?;
        let res = |l: f64, f: &[f64]| resolvent_of_field(l, &self.field_f64(f)?);
        match relation {
            Relation::Normalization => {
                let zero = vec![0.0; 2 * self.modes];
                Ok(res(lambda, &zero)? - linalg::identity(dim) * c(0.0, -1.0 / lambda))
            }
            Relation::Adjoint => {
                let f = params.require_f(id)?;
                Ok(res(lambda, &f)?.adjoint() - res(-lambda, &f)?)
            }
            Relation::Scaling => {
                let nu = zero_check("nu", params.require_nu(id)?)?;
                let f = params.require_f(id)?;
                let nf: Vec<f64> = f.iter().map(|x| nu * x).collect();
                Ok(res(nu * lambda, &nf)? * c(nu, 0.0) - res(lambda, &f)?)
            }
            Relation::ResolventIdentity => {
                let nu = zero_check("nu", params.require_nu(id)?)?;
                let f = params.require_f(id)?;
                let (rl, rn) = (res(lambda, &f)?, res(nu, &f)?);
                Ok(&rl - &rn - (&rl * &rn) * c(0.0, nu - lambda))
            }
            Relation::Product => {
                let nu = zero_check("nu", params.require_nu(id)?)?;
                let (f, g) = (params.require_f(id)?, params.require_g(id)?);
                if lambda + nu == 0.0 {
                    return Err(Error::InvalidParam { relation: id.into(), msg: "lambda + nu must be nonzero".into() });
                }
                let sigma = params.sigma_f64(id)?;
                let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
                let (rf, rg, rs) = (res(lambda, &f)?, res(nu, &g)?, res(lambda + nu, &fg)?);
                let inner = &rf + &rg + (&rf * &rf * &rg) * c(0.0, sigma);
                Ok(&rf * &rg - rs * inner)
            }
            Relation::Commutator => {
                let nu = zero_check("nu", params.require_nu(id)?)?;
                let (f, g) = (params.require_f(id)?, params.require_g(id)?);
                let sigma = params.sigma_f64(id)?;
                let (rf, rg) = (res(lambda, &f)?, res(nu, &g)?);
                let comm = &rf * &rg - &rg * &rf;
                Ok(comm - (&rf * &rg * &rg * &rf) * c(0.0, sigma))
            }
        }
    }

    pub fn relation_residual(&self, relation: Relation, params: &RelationParams, cutoff: usize) -> Result<Residual> {
        if cutoff > self.levels {
            return Err(Error::CutoffTooLarge { cutoff, limit: self.levels });
        }
        let diff = self.relation_difference(relation, params)?;
        Ok(Residual {
            relation: relation.id().to_string(),
            raw: linalg::operator_norm(&diff),
            compressed: self.compressed_norm(&diff, cutoff)?,
        })
    }
}

/// `(iλ − Φ)^{-1}` through the spectral decomposition of the self-adjoint `Φ`.
pub fn resolvent_of_field(lambda: f64, field: &CMatrix) -> Result<CMatrix> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let (values, vectors) = linalg::hermitian_eigen(field)?;
    let diag: Vec<Complex64> = values.iter().map(|&x| c(-x, lambda).inv()).collect();
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    Ok(&vectors * d * vectors.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Normalization,
    Adjoint,
    Scaling,
    ResolventIdentity,
    Product,
    /// `[R(λ,f), R(ν,g)] = iσ(f,g) R(λ,f) R(ν,g)² R(λ,f)`.
    Commutator,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Normalization,
        Relation::Adjoint,
        Relation::Scaling,
        Relation::ResolventIdentity,
        Relation::Product,
        Relation::Commutator,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Relation::Normalization => "normalization",
            Relation::Adjoint => "adjoint",
            Relation::Scaling => "scaling",
            Relation::ResolventIdentity => "resolvent-identity",
            Relation::Product => "product",
            Relation::Commutator => "commutator",
        }
    }

    /// Relations involving a single field, exact at every truncation.
    pub fn is_exact(self) -> bool {
        !matches!(self, Relation::Product | Relation::Commutator)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Relation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL.into_iter().find(|r| r.id() == s).ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

/// Parameters of a relation check, as read from `{"lambda", "nu", "f", "g"}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<VecX>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<VecX>,
}

impl RelationParams {
    pub fn new(lambda: f64, nu: f64, f: VecX, g: VecX) -> Self {
        RelationParams { lambda: Some(lambda), nu: Some(nu), f: Some(f), g: Some(g) }
    }

    fn missing(relation: &str, name: &str) -> Error {
        Error::MissingParam { relation: relation.into(), name: name.into() }
    }

    fn require_lambda(&self, relation: &str) -> Result<f64> {
        self.lambda.ok_or_else(|| Self::missing(relation, "lambda"))
    }

    fn require_nu(&self, relation: &str) -> Result<f64> {
        self.nu.ok_or_else(|| Self::missing(relation, "nu"))
    }

    fn require_f(&self, relation: &str) -> Result<Vec<f64>> {
        self.f.as_ref().map(VecX::to_f64).ok_or_else(|| Self::missing(relation, "f"))
    }

    fn require_g(&self, relation: &str) -> Result<Vec<f64>> {
        self.g.as_ref().map(VecX::to_f64).ok_or_else(|| Self::missing(relation, "g"))
    }

    fn sigma_f64(&self, relation: &str) -> Result<f64> {
        let f = self.f.as_ref().ok_or_else(|| Self::missing(relation, "f"))?;
        let g = self.g.as_ref().ok_or_else(|| Self::missing(relation, "g"))?;
        if f.len() != g.len() || f.len() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: f.len(), found: g.len() });
        }
        let space = SymplecticSpace::standard(f.len() / 2)?;
        Ok(rational::to_f64(&space.sigma(f, g)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub relation: String,
    pub raw: f64,
    pub compressed: f64,
}

/// One resolvent symbol `R(λ, f)` or its adjoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResolventSymbol {
    pub lambda: Rational,
    pub f: VecX,
    pub adjoint: bool,
}

impl ResolventSymbol {
    pub fn new(lambda: Rational, f: VecX) -> Result<Self> {
        if lambda == rational::int(0) {
            return Err(Error::ZeroLambda);
        }
        Ok(ResolventSymbol { lambda, f, adjoint: false })
    }

    pub fn adjoint(&self) -> Self {
        ResolventSymbol { adjoint: !self.adjoint, ..self.clone() }
    }
}

/// An ordered product of resolvent symbols in the free *-algebra.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ResolventWord {
    pub factors: Vec<ResolventSymbol>,
}

impl ResolventWord {
    pub fn new(factors: Vec<ResolventSymbol>) -> Self {
        ResolventWord { factors }
    }

    pub fn symbol(lambda: Rational, f: VecX) -> Result<Self> {
        Ok(ResolventWord { factors: vec![ResolventSymbol::new(lambda, f)?] })
    }

    pub fn concat(&self, other: &ResolventWord) -> ResolventWord {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        ResolventWord { factors }
    }

    pub fn adjoint(&self) -> ResolventWord {
        ResolventWord { factors: self.factors.iter().rev().map(ResolventSymbol::adjoint).collect() }
    }

    pub fn to_matrix(&self, rep: &FockRep) -> Result<CMatrix> {
        let mut out = linalg::identity(rep.dim());
        for s in &self.factors {
            let r = rep.resolvent_matrix(rational::to_f64(&s.lambda), &s.f)?;
            out = if s.adjoint { out * r.adjoint() } else { out * r };
        }
        Ok(out)
    }
}
