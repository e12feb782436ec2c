//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GwError, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eig(a: &RMat) -> (Vec<f64>, RMat) {
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = RMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(a);
    let eig = h.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn herm_eigvals(a: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn sym_eigvals(a: &RMat) -> Vec<f64> {
    let mut v: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_r(a: &RMat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn max_abs_diff_r(a: &RMat, b: &RMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn op_norm_r(a: &RMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(a: &CMat) -> RMat {
    a.map(|z| z.re)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with the 1-norm condition number.
pub fn inverse_cond(a: &CMat) -> Option<(CMat, f64)> {
    let inv = a.clone().lu().try_inverse()?;
    if inv.iter().any(|z| !z.is_finite()) {
        return None;
    }
    let cond = one_norm(a) * one_norm(&inv);
    Some((inv, cond))
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    inverse_cond(a)
        .map(|(inv, _)| inv)
        .ok_or_else(|| GwError::Solver("singular matrix".into()))
}

/// Symmetric positive definite square root; fails on eigenvalues below `floor`.
pub fn spd_sqrt(a: &RMat, floor: f64) -> std::result::Result<RMat, (usize, f64)> {
    let (vals, vecs) = sym_eig(a);
    if let Some((i, &v)) = vals.iter().enumerate().find(|(_, &v)| v <= floor) {
        return Err((i, v));
    }
    let d = RMat::from_diagonal(&RVec::from_iterator(vals.len(), vals.iter().map(|v| v.sqrt())));
    let s = &vecs * d * vecs.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Apply a real function to a symmetric matrix through its eigenbasis.
pub fn sym_fn(a: &RMat, f: impl Fn(f64) -> f64) -> RMat {
    let (vals, vecs) = sym_eig(a);
    let d = RMat::from_diagonal(&RVec::from_iterator(vals.len(), vals.iter().map(|&v| f(v))));
    &vecs * d * vecs.transpose()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.is_finite())
}
