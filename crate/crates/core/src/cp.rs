//! Finite samples of c.c.p. maps `φ: A → M_k(C)` and the operations on them:
//! spectral splitting of `e = φ(1)`, unitalization `ψ = f φ f` with
//! `f = (P e)^{-1/2}`, Følner certificates and multiplicative-domain
//! distances.
//!
//! Complete positivity cannot be verified from finitely many images. A
//! sample is only checked for the necessary conditions: `φ(1)` self-adjoint
//! with spectrum in `[0, 1]`, and `φ(A*) = φ(A)^†` on the recorded adjoint
//! quadruples.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::linalg::{self, c, CMatrix};
use crate::par;
use crate::weyl::WeylElement;

pub use crate::linalg::two_norm;

/// Eigenvalues within this distance outside `[0, 1]` are clamped.
pub const SPECTRUM_TOL: f64 = 1e-10;
/// Tolerance for self-adjointness and adjoint compatibility of images.
pub const ADJOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CpSample {
    pub unit: CMatrix,
    pub images: BTreeMap<String, CMatrix>,
    /// `(A, B, AB)` label triples.
    pub pairs: Vec<[String; 3]>,
    /// `(A, A*, A*A, AA*)` label quadruples.
    pub adjoints: Vec<[String; 4]>,
    /// Reference C*-norms for the asymptotic-isometry check.
    pub norm_refs: BTreeMap<String, f64>,
    /// Upper bounds on `‖A‖` (for example the ℓ¹ bound of a Weyl element).
    pub norm_bounds: BTreeMap<String, f64>,
}

impl CpSample {
    pub fn new(unit: CMatrix) -> Self {
        CpSample {
            unit,
            images: BTreeMap::new(),
            pairs: Vec::new(),
            adjoints: Vec::new(),
            norm_refs: BTreeMap::new(),
            norm_bounds: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.unit.nrows()
    }

    pub fn image(&self, label: &str) -> Result<&CMatrix> {
        self.images.get(label).ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    /// Checks shapes, the unit image, and the recorded adjoint quadruples.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.unit.ncols() != k {
            return Err(Error::NotSquare { rows: k, cols: self.unit.ncols() });
        }
        for (label, m) in &self.images {
            if m.shape() != (k, k) {
                return Err(Error::InvalidSample(format!("image {label:?} is {:?}, expected {k}x{k}", m.shape())));
            }
        }
        check_unit_spectrum(&self.unit)?;
        for quad in &self.adjoints {
            let a = self.image(&quad[0])?;
            let a_adj = self.image(&quad[1])?;
            let dev = linalg::max_abs_diff(&a.adjoint(), a_adj);
            if dev > ADJOINT_TOL {
                return Err(Error::InvalidSample(format!(
                    "phi({}) is not the adjoint of phi({}) (deviation {dev:e})",
                    quad[1], quad[0]
                )));
            }
        }
        Ok(())
    }

    /// Applies `X ↦ L X R` to the unit and every image.
    fn conjugated(&self, left: &CMatrix, right: &CMatrix) -> CpSample {
        CpSample {
            unit: left * &self.unit * right,
            images: self.images.iter().map(|(l, m)| (l.clone(), left * m * right)).collect(),
            pairs: self.pairs.clone(),
            adjoints: self.adjoints.clone(),
            norm_refs: self.norm_refs.clone(),
            norm_bounds: self.norm_bounds.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CpSampleJson::from(self))?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let raw: CpSampleJson = serde_json::from_str(src)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct CpSampleJson {
    k: usize,
    unit: Vec<[f64; 2]>,
    images: BTreeMap<String, Vec<[f64; 2]>>,
    #[serde(default)]
    pairs: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    adjoints: Vec<[String; 4]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    norm_refs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    norm_bounds: BTreeMap<String, f64>,
}

impl From<&CpSample> for CpSampleJson {
    fn from(s: &CpSample) -> Self {
        CpSampleJson {
            k: s.k(),
            unit: linalg::to_pairs(&s.unit),
            images: s.images.iter().map(|(l, m)| (l.clone(), linalg::to_pairs(m))).collect(),
            pairs: s.pairs.clone(),
            adjoints: s.adjoints.clone(),
            norm_refs: s.norm_refs.clone(),
            norm_bounds: s.norm_bounds.clone(),
        }
    }
}

impl TryFrom<CpSampleJson> for CpSample {
    type Error = Error;
    fn try_from(raw: CpSampleJson) -> Result<Self> {
        let mut sample = CpSample::new(linalg::from_pairs(raw.k, &raw.unit)?);
        for (label, m) in raw.images {
            let m = linalg::from_pairs(raw.k, &m)?;
            sample.images.insert(label, m);
        }
        sample.pairs = raw.pairs;
        sample.adjoints = raw.adjoints;
        sample.norm_refs = raw.norm_refs;
        sample.norm_bounds = raw.norm_bounds;
        Ok(sample)
    }
}

fn check_unit_spectrum(e: &CMatrix) -> Result<Vec<f64>> {
    let dev = linalg::self_adjoint_deviation(e);
    if dev > ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint(dev));
    }
    let (values, _) = linalg::hermitian_eigen(e)?;
    values.into_iter().map(clamp_eigenvalue).collect()
}

fn clamp_eigenvalue(l: f64) -> Result<f64> {
    if !(-SPECTRUM_TOL..=1.0 + SPECTRUM_TOL).contains(&l) {
        return Err(Error::SpectrumOutOfRange(l));
    }
    Ok(l.clamp(0.0, 1.0))
}

/// The three-way split of the spectrum of `e` around `ε` and `1 − ε`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub eps: f64,
    pub k: usize,
    /// Eigenvalues in `[0, ε]`.
    pub lambda0: Vec<f64>,
    /// Eigenvalues in `(ε, 1 − ε)`.
    pub lambda_mid: Vec<f64>,
    /// Eigenvalues in `[1 − ε, 1]`.
    pub lambda1: Vec<f64>,
    /// Orthonormal eigenvectors for `lambda1`, as columns.
    pub basis1: CMatrix,
    /// `P = E([1 − ε, 1])`.
    pub projection: CMatrix,
    /// `‖e − P‖_{2,tr}`, from the matrices.
    pub distance: f64,
    /// `‖e − e²‖_{2,tr}`, from the matrices.
    pub delta: f64,
    /// `sqrt(ε² + δ²/(ε − ε²)²)`.
    pub certified_bound: f64,
}

impl SpectralSplit {
    /// `‖e − P‖_{2,tr}` recomputed from the eigenvalues alone.
    pub fn spectral_distance(&self) -> f64 {
        let s0: f64 = self.lambda0.iter().map(|l| l * l).sum();
        let sm: f64 = self.lambda_mid.iter().map(|l| l * l).sum();
        let s1: f64 = self.lambda1.iter().map(|l| (1.0 - l) * (1.0 - l)).sum();
        ((s0 + sm + s1) / self.k as f64).sqrt()
    }

    pub fn mid_fraction(&self) -> f64 {
        self.lambda_mid.len() as f64 / self.k as f64
    }

    /// `(δ / (ε − ε²))²`, which bounds [`Self::mid_fraction`].
    pub fn mid_fraction_bound(&self) -> f64 {
        (self.delta / (self.eps - self.eps * self.eps)).powi(2)
    }

    pub fn rank(&self) -> usize {
        self.lambda1.len()
    }

    /// `‖f − P‖` in operator norm, `f = (P e)^{-1/2}` on the range of `P`.
    pub fn f_deviation(&self) -> f64 {
        self.lambda1.iter().map(|l| (l.powf(-0.5) - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Default ε for a given `δ = ‖e − e²‖_{2,tr}`: `δ^{2/3}` clipped to
/// `[1e-3, 0.49]`, so both terms of the certified bound vanish with δ.
pub fn default_eps(delta: f64) -> f64 {
    delta.powf(2.0 / 3.0).clamp(1e-3, 0.49)
}

pub fn spectral_split(e: &CMatrix, eps: f64) -> Result<SpectralSplit> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidEpsilon(format!(
            "eps = {eps} outside (0, 1/2): the estimate min over mid of λ−λ² = ε−ε² requires ε<1/2"
        )));
    }
    let k = e.nrows();
    if e.ncols() != k {
        return Err(Error::NotSquare { rows: k, cols: e.ncols() });
    }
    let dev = linalg::self_adjoint_deviation(e);
    if dev > ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint(dev));
    }
    let (values, vectors) = linalg::hermitian_eigen(e)?;
    let mut lambda0 = Vec::new();
    let mut lambda_mid = Vec::new();
    let mut lambda1 = Vec::new();
    let mut cols1 = Vec::new();
    for (i, &raw) in values.iter().enumerate() {
        let l = clamp_eigenvalue(raw)?;
        if l <= eps {
            lambda0.push(l);
        } else if l >= 1.0 - eps {
            lambda1.push(l);
            cols1.push(i);
        } else {
            lambda_mid.push(l);
        }
    }
    let mut basis1 = CMatrix::zeros(k, cols1.len());
    for (j, &i) in cols1.iter().enumerate() {
        basis1.set_column(j, &vectors.column(i));
    }
    let projection = &basis1 * basis1.adjoint();
    let distance = two_norm(&(e - &projection))?;
    let delta = two_norm(&(e - e * e))?;
    let certified_bound = (eps * eps + (delta / (eps - eps * eps)).powi(2)).sqrt();
    Ok(SpectralSplit { eps, k, lambda0, lambda_mid, lambda1, basis1, projection, distance, delta, certified_bound })
}

/// The unitalized sample `ψ = f φ f` on the range of `P`, with the split it
/// was built from.
#[derive(Debug, Clone)]
pub struct Unitalization {
    pub psi: CpSample,
    pub split: SpectralSplit,
}

impl Unitalization {
    /// Upper bound on the `ψ` multiplicativity defect of a pair, computed from
    /// the spectrum of `e` and the `φ` defect only.
    ///
    /// With a Stinespring form `φ = V* π(·) V` (`e = V*V`, `‖Vf‖ = 1`):
    /// `ψ(AB) − ψ(A)ψ(B) = f D f + f φ(A)(P − f²)φ(B) f + f φ(A)(1 − P)φ(B) f`
    /// where `D` is the `φ` defect, giving
    /// `‖·‖_{2,k} ≤ ‖f‖²·‖D‖_{2,k} + a·b·(‖P − f²‖_{2,k} + sqrt(tr((1 − P)e)))`
    /// and a factor `sqrt(k/k')` for the renormalized trace on `M_{k'}`.
    pub fn defect_bound(&self, defect_phi: f64, bound_a: f64, bound_b: f64) -> f64 {
        let split = &self.split;
        let k = split.k as f64;
        let k_prime = split.rank() as f64;
        let min1 = split.lambda1.iter().copied().fold(1.0, f64::min);
        let f_sq = 1.0 / min1;
        let p_minus_f2 = (split.lambda1.iter().map(|l| (1.0 - 1.0 / l).powi(2)).sum::<f64>() / k).sqrt();
        let leak = (split.lambda0.iter().chain(&split.lambda_mid).sum::<f64>() / k).sqrt();
        (k / k_prime).sqrt() * (f_sq * defect_phi + bound_a * bound_b * (p_minus_f2 + leak))
    }
}

/// `ψ(A) = f φ(A) f` compressed to `ran P`, `f = (P e)^{-1/2}`.
pub fn unitalize(sample: &CpSample, eps: f64) -> Result<Unitalization> {
    let split = spectral_split(&sample.unit, eps)?;
    if split.rank() == 0 {
        return Err(Error::NoSpectrumNearOne);
    }
    let scale = linalg::from_real_diagonal(&split.lambda1.iter().map(|l| l.powf(-0.5)).collect::<Vec<_>>());
    // f restricted to ran P, in the eigenbasis: Q diag(λ^{-1/2})
    let right = &split.basis1 * &scale;
    let left = right.adjoint();
    let psi = sample.conjugated(&left, &right);
    Ok(Unitalization { psi, split })
}

/// `φ(A) = V† rep(A) V` for a fixed contraction `V`.
pub fn contraction_sample(model: &LatticeModel, elements: &ElementFamily, v: &CMatrix) -> Result<CpSample> {
    let k = model.size();
    if v.shape() != (k, k) {
        return Err(Error::InvalidSample(format!("contraction is {:?}, expected {k}x{k}", v.shape())));
    }
    let v_adj = v.adjoint();
    let mut sample = CpSample::new(&v_adj * v);
    for (label, a) in &elements.elements {
        let rep = model.rep_matrix(a)?.matrix;
        sample.images.insert(label.clone(), &v_adj * rep * v);
        sample.norm_bounds.insert(label.clone(), a.l1_bound());
    }
    sample.pairs = elements.pairs.clone();
    sample.adjoints = elements.adjoints.clone();
    Ok(sample)
}

/// The lattice compression itself (`V = 1`).
pub fn lattice_sample(model: &LatticeModel, elements: &ElementFamily) -> Result<CpSample> {
    contraction_sample(model, elements, &linalg::identity(model.size()))
}

/// Seeded random contraction `V = diag(s) W†` with `W` unitary, `s₀ = 1` and
/// the remaining singular values at distance `spread·u` from 0 or 1.
/// `spread = 1` gives a generic spectrum of `V†V` in `[0, 1]`; small spreads
/// give near-projections.
pub fn random_contraction(k: usize, seed: u64, spread: f64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = CMatrix::from_fn(k, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let q = gauss.qr().q();
    let mut s = DVector::<Complex64>::zeros(k);
    for (j, sj) in s.iter_mut().enumerate() {
        let value = if j == 0 {
            1.0
        } else {
            let near_one: bool = rng.random();
            let u: f64 = rng.random();
            let base = if near_one { 1.0 } else { 0.0 };
            (base - spread * u).abs()
        };
        *sj = c(value, 0.0);
    }
    CMatrix::from_diagonal(&s) * q.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub spread: f64,
}

impl SynthConfig {
    pub fn generic(seed: u64) -> Self {
        SynthConfig { seed, spread: 1.0 }
    }

    /// Spread `10^{-6u}` with `u` drawn from the seed, covering generic
    /// spectra down to near-projections.
    pub fn ensemble(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let u: f64 = rng.random();
        SynthConfig { seed, spread: 10f64.powf(-6.0 * u) }
    }
}

/// Random non-unital c.c.p. sample `A ↦ V† rep(A) V` (generic spread).
pub fn synth_ccp(model: &LatticeModel, elements: &ElementFamily, seed: u64) -> Result<CpSample> {
    synth_ccp_with(model, elements, SynthConfig::generic(seed))
}

pub fn synth_ccp_with(model: &LatticeModel, elements: &ElementFamily, config: SynthConfig) -> Result<CpSample> {
    let v = random_contraction(model.size(), config.seed, config.spread);
    contraction_sample(model, elements, &v)
}

/// Labeled Weyl elements together with the product and adjoint labels
/// needed by certificates.
#[derive(Debug, Clone, Default)]
pub struct ElementFamily {
    pub elements: Vec<(String, WeylElement)>,
    pub pairs: Vec<[String; 3]>,
    pub adjoints: Vec<[String; 4]>,
}

impl ElementFamily {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, label: String, a: WeylElement) {
        if !self.elements.iter().any(|(l, _)| *l == label) {
            self.elements.push((label, a));
        }
    }

    fn get(&self, label: &str) -> Result<&WeylElement> {
        self.elements
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    pub fn element(mut self, label: impl Into<String>, a: WeylElement) -> Self {
        self.push(label.into(), a);
        self
    }

    /// Adds the product `A·B` under the label `(A)*(B)` and records the pair.
    pub fn pair(mut self, a: &str, b: &str) -> Result<Self> {
        let product = self.get(a)?.multiply(self.get(b)?)?;
        let label = format!("({a})*({b})");
        self.push(label.clone(), product);
        self.pairs.push([a.to_string(), b.to_string(), label]);
        Ok(self)
    }

    /// Adds `A*`, `A*A` and `AA*` for the multiplicative-domain distance.
    pub fn adjoint_closure(mut self, a: &str) -> Result<Self> {
        let el = self.get(a)?.clone();
        let adj = el.adjoint();
        let adj_label = format!("adj({a})");
        let aa_label = format!("adj({a})*({a})");
        let a_a_label = format!("({a})*adj({a})");
        self.push(aa_label.clone(), adj.multiply(&el)?);
        self.push(a_a_label.clone(), el.multiply(&adj)?);
        self.push(adj_label.clone(), adj);
        self.adjoints.push([a.to_string(), adj_label, aa_label, a_a_label]);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub a: String,
    pub b: String,
    pub ab: String,
    pub defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementCheck {
    pub label: String,
    pub compressed_norm: f64,
    pub reference_norm: Option<f64>,
    pub deviation: Option<f64>,
    pub pass: Option<bool>,
    /// `tr∘φ(A)` as `[re, im]`.
    pub trace: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub eps: f64,
    pub pairs: Vec<PairCheck>,
    pub elements: Vec<ElementCheck>,
    pub verdict: bool,
}

/// Checks asymptotic multiplicativity (`‖φ(AB) − φ(A)φ(B)‖_{2,tr} ≤ ε`) for
/// each pair and asymptotic isometry (`|‖φ(A)‖ − ref| ≤ ε`) where a reference
/// norm is supplied; also lists `tr∘φ` on every image.
pub fn folner_certificate(
    sample: &CpSample,
    pairs: &[[String; 3]],
    eps: f64,
    norm_refs: &BTreeMap<String, f64>,
) -> Result<Certificate> {
    let mut pair_checks = Vec::with_capacity(pairs.len());
    for [a, b, ab] in pairs {
        let (pa, pb, pab) = (sample.image(a)?, sample.image(b)?, sample.image(ab)?);
        let defect = two_norm(&(pab - pa * pb))?;
        pair_checks.push(PairCheck { a: a.clone(), b: b.clone(), ab: ab.clone(), defect, pass: defect <= eps });
    }
    for label in norm_refs.keys() {
        sample.image(label)?;
    }
    let mut elements = Vec::with_capacity(sample.images.len());
    for (label, m) in &sample.images {
        let compressed_norm = linalg::operator_norm(m);
        let reference_norm = norm_refs.get(label).copied();
        let deviation = reference_norm.map(|r| (compressed_norm - r).abs());
        let tr = linalg::normalized_trace(m)?;
        elements.push(ElementCheck {
            label: label.clone(),
            compressed_norm,
            reference_norm,
            deviation,
            pass: deviation.map(|d| d <= eps),
            trace: [tr.re, tr.im],
        });
    }
    let verdict = pair_checks.iter().all(|p| p.pass) && elements.iter().all(|e| e.pass != Some(false));
    Ok(Certificate { eps, pairs: pair_checks, elements, verdict })
}

/// `max(‖φ(A*A) − φ(A)*φ(A)‖_{2,tr}, ‖φ(AA*) − φ(A)φ(A)*‖_{2,tr})`; zero iff
/// both multiplicative-domain conditions hold on the sample.
pub fn mult_domain_distance(sample: &CpSample, label: &str) -> Result<f64> {
    let quad =
        sample.adjoints.iter().find(|q| q[0] == label).ok_or_else(|| Error::MissingLabel(format!("adj({label})")))?;
    let a = sample.image(&quad[0])?;
    let a_star_a = sample.image(&quad[2])?;
    let a_a_star = sample.image(&quad[3])?;
    let left = two_norm(&(a_star_a - a.adjoint() * a))?;
    let right = two_norm(&(a_a_star - a * a.adjoint()))?;
    Ok(left.max(right))
}

/// Block-diagonal direct sum of samples sharing the same labels. The norm of
/// each image is the maximum over the family.
pub fn direct_sum(samples: &[CpSample]) -> Result<CpSample> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidSample("empty family".into()));
    };
    let units: Vec<&CMatrix> = samples.iter().map(|s| &s.unit).collect();
    let mut out = CpSample::new(linalg::direct_sum(&units));
    for label in first.images.keys() {
        let blocks = samples.iter().map(|s| s.image(label)).collect::<Result<Vec<_>>>()?;
        out.images.insert(label.clone(), linalg::direct_sum(&blocks));
    }
    out.pairs = first.pairs.clone();
    out.adjoints = first.adjoints.clone();
    out.norm_refs = first.norm_refs.clone();
    out.norm_bounds = first.norm_bounds.clone();
    Ok(out)
}

/// One seeded draw of the splitting / unitalization ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub seed: u64,
    pub spread: f64,
    pub k: usize,
    pub delta: f64,
    pub eps: f64,
    pub distance: f64,
    pub spectral_distance: f64,
    pub certified_bound: f64,
    pub mid_fraction: f64,
    pub mid_fraction_bound: f64,
    pub rank: usize,
    /// `max |ψ(1) − 1|`.
    pub unit_deviation: f64,
    pub f_deviation: f64,
    /// Per pair: (φ defect, ψ defect, bound on the ψ defect).
    pub defects: Vec<[f64; 3]>,
}

impl EnsembleRecord {
    pub fn within_bound(&self) -> bool {
        self.distance <= self.certified_bound + 1e-10
    }

    pub fn inflation_ok(&self) -> bool {
        self.defects.iter().all(|[_, psi, bound]| *psi <= bound + 1e-10)
    }
}

pub fn ensemble_record(model: &LatticeModel, family: &ElementFamily, config: SynthConfig) -> Result<EnsembleRecord> {
    let sample = synth_ccp_with(model, family, config)?;
    let delta = two_norm(&(&sample.unit - &sample.unit * &sample.unit))?;
    let eps = default_eps(delta);
    let unital = unitalize(&sample, eps)?;
    let split = &unital.split;
    let k_prime = split.rank();
    let unit_deviation = linalg::max_abs_diff(&unital.psi.unit, &linalg::identity(k_prime));
    let mut defects = Vec::with_capacity(sample.pairs.len());
    for [a, b, ab] in &sample.pairs {
        let phi = two_norm(&(sample.image(ab)? - sample.image(a)? * sample.image(b)?))?;
        let psi = &unital.psi;
        let psi_defect = two_norm(&(psi.image(ab)? - psi.image(a)? * psi.image(b)?))?;
        let bound = unital.defect_bound(phi, sample.norm_bounds[a], sample.norm_bounds[b]);
        defects.push([phi, psi_defect, bound]);
    }
    Ok(EnsembleRecord {
        seed: config.seed,
        spread: config.spread,
        k: split.k,
        delta,
        eps,
        distance: split.distance,
        spectral_distance: split.spectral_distance(),
        certified_bound: split.certified_bound,
        mid_fraction: split.mid_fraction(),
        mid_fraction_bound: split.mid_fraction_bound(),
        rank: k_prime,
        unit_deviation,
        f_deviation: split.f_deviation(),
        defects,
    })
}

/// Runs [`ensemble_record`] for every seed (data-parallel, order-preserving).
pub fn ensemble(model: &LatticeModel, family: &ElementFamily, seeds: &[u64]) -> Result<Vec<EnsembleRecord>> {
    par::map(seeds, |&seed| ensemble_record(model, family, SynthConfig::ensemble(seed))).into_iter().collect()
}

pub fn ensemble_sequential(model: &LatticeModel, family: &ElementFamily, seeds: &[u64]) -> Result<Vec<EnsembleRecord>> {
    par::map_sequential(seeds, |&seed| ensemble_record(model, family, SynthConfig::ensemble(seed)))
        .into_iter()
        .collect()
}
