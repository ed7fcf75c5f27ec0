//! Dense complex matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(k: usize) -> CMatrix {
    CMatrix::identity(k, k)
}

pub fn from_real_diagonal(diag: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(diag.len(), diag.len());
    for (i, &d) in diag.iter().enumerate() {
        m[(i, i)] = c(d, 0.0);
    }
    m
}

fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Normalized Hilbert–Schmidt norm `sqrt(tr(F*F))` with `tr` the tracial
/// state of `M_k`.
pub fn two_norm(m: &CMatrix) -> Result<f64> {
    let k = ensure_square(m)?;
    if k == 0 {
        return Ok(0.0);
    }
    let sum: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    Ok((sum / k as f64).sqrt())
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().sum()
}

/// Numerical rank: singular values above `tol`.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > tol).count()
}

pub fn normalized_trace(m: &CMatrix) -> Result<Complex64> {
    let k = ensure_square(m)?;
    if k == 0 {
        return Ok(Complex64::default());
    }
    Ok(m.trace() / k as f64)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn self_adjoint_deviation(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

fn is_diagonal(m: &CMatrix) -> bool {
    let k = m.nrows();
    (0..k).all(|i| (0..k).all(|j| i == j || m[(i, j)] == Complex64::default()))
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues in ascending order
/// with the eigenvectors as columns. Exactly diagonal inputs keep the
/// standard basis in its natural order.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let k = ensure_square(m)?;
    if is_diagonal(m) {
        let values = (0..k).map(|i| m[(i, i)].re).collect();
        return Ok((values, identity(k)));
    }
    let hermitian = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = hermitian.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(k, k);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[&CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(b);
        offset += k;
    }
    out
}

/// Row-major `[[re, im], ...]` encoding used by the sample JSON schema.
pub fn to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub fn from_pairs(k: usize, pairs: &[[f64; 2]]) -> Result<CMatrix> {
    if pairs.len() != k * k {
        return Err(Error::InvalidSample(format!("expected {} entries for k={k}, found {}", k * k, pairs.len())));
    }
    Ok(CMatrix::from_row_iterator(k, k, pairs.iter().map(|p| c(p[0], p[1]))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_norm_examples() {
        for k in 1..6 {
            assert!((two_norm(&identity(k)).unwrap() - 1.0).abs() < 1e-15);
        }
        let e = from_real_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        assert!((two_norm(&e).unwrap() - 0.5).abs() < 1e-15);
        let mut e12 = CMatrix::zeros(2, 2);
        e12[(0, 1)] = c(1.0, 0.0);
        assert!((two_norm(&e12).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(two_norm(&CMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn norms_of_shift() {
        let mut s = CMatrix::zeros(3, 3);
        s[(1, 0)] = c(1.0, 0.0);
        s[(2, 1)] = c(1.0, 0.0);
        assert!((operator_norm(&s) - 1.0).abs() < 1e-12);
        assert!((trace_norm(&s) - 2.0).abs() < 1e-12);
        assert_eq!(rank(&s, 1e-9), 2);
    }

    #[test]
    fn eigen_sorted_and_diagonal_fast_path() {
        let (vals, vecs) = hermitian_eigen(&from_real_diagonal(&[0.5, 0.1, 0.9])).unwrap();
        assert_eq!(vals, vec![0.5, 0.1, 0.9]);
        assert_eq!(vecs, identity(3));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(0.0, 1.0);
        m[(1, 0)] = c(0.0, -1.0);
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let rebuilt = &vecs * from_real_diagonal(&vals) * vecs.adjoint();
        assert!(max_abs_diff(&rebuilt, &m) < 1e-12);
    }

    #[test]
    fn pairs_round_trip() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.5, -2.0);
        assert_eq!(from_pairs(2, &to_pairs(&m)).unwrap(), m);
        assert!(from_pairs(3, &to_pairs(&m)).is_err());
    }
}
