use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::basis::{annihilate, create, FockSector};
use crate::error::{GwError, Result};
use crate::linalg::{self, RMat};

/// Sparse sector Hamiltonian `Σ h_ij a†_i a_j + ½ Σ_{i≠j} V_ij n_i n_j`.
#[derive(Clone, Debug)]
pub struct SectorHamiltonian {
    pub sector: FockSector,
    pub h_mat: CsrMatrix<f64>,
}

/// Assemble the sector Hamiltonian from a one-body operator matrix and an
/// optional Coulomb kernel.
pub fn build_sector_with(one_body: &RMat, coulomb: Option<&RMat>, n: usize, cap: usize) -> Result<SectorHamiltonian> {
    let m = one_body.nrows();
    let sector = FockSector::new(m, n, cap)?;
    let dim = sector.dim();
    let mut coo = CooMatrix::new(dim, dim);
    for (k, &word) in sector.basis.iter().enumerate() {
        let mut diag = 0.0;
        for i in 0..m {
            if word >> i & 1 == 0 {
                continue;
            }
            diag += one_body[(i, i)];
            if let Some(v) = coulomb {
                for j in (i + 1)..m {
                    if word >> j & 1 == 1 {
                        diag += v[(i, j)];
                    }
                }
            }
        }
        if diag != 0.0 {
            coo.push(k, k, diag);
        }
        for j in 0..m {
            let Some((s1, w1)) = annihilate(word, j) else { continue };
            for i in 0..m {
                if i == j || one_body[(i, j)] == 0.0 {
                    continue;
                }
                if let Some((s2, w2)) = create(w1, i) {
                    let row = sector.index_of(w2).expect("same sector");
                    coo.push(row, k, s1 * s2 * one_body[(i, j)]);
                }
            }
        }
    }
    Ok(SectorHamiltonian {
        sector,
        h_mat: CsrMatrix::from(&coo),
    })
}

impl SectorHamiltonian {
    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    pub fn to_dense(&self) -> RMat {
        let mut d = RMat::zeros(self.dim(), self.dim());
        for (i, j, v) in self.h_mat.triplet_iter() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.h_mat
            .row_iter()
            .map(|row| row.col_indices().iter().zip(row.values()).map(|(&c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.h_mat
            .row_iter()
            .map(|row| row.col_indices().iter().zip(row.values()).map(|(&c, v)| x[c] * *v).sum())
            .collect()
    }

    pub fn symmetry_residual(&self) -> f64 {
        linalg::max_abs_diff_r(&self.to_dense(), &self.to_dense().transpose())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest two eigenpairs by Lanczos with full reorthogonalization.
pub fn lanczos_lowest(h: &SectorHamiltonian, tol: f64, max_iter: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nrm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = max_iter.min(n);
    for k in 0..steps {
        let mut w = h.apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let kk = alpha.len();
        let t = RMat::from_fn(kk, kk, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let (vals, vecs) = linalg::sym_eig(&t);
        let done = kk == n || b < 1e-14;
        let want = 2.min(kk);
        let converged = kk >= want && (0..want).all(|i| (b * vecs[(kk - 1, i)]).abs() < tol);
        if (converged && kk >= 2.min(n)) || done {
            let mut x = vec![0.0; n];
            for (i, q) in basis.iter().enumerate() {
                x.iter_mut().zip(q).for_each(|(xv, qv)| *xv += vecs[(i, 0)] * qv);
            }
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|xv| *xv /= nx);
            return Ok((vals, x));
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(GwError::Solver(format!("Lanczos did not converge in {steps} steps")))
}

/// Solve `(z − (s·H − s·e0)) x = b` for `s = ±1` by conjugate orthogonal CG.
pub fn cocg_shifted(
    h: &SectorHamiltonian,
    z: Complex64,
    sign: f64,
    e0: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let n = h.dim();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let hx = h.apply_c(x);
        x.iter().zip(hx).map(|(xi, hi)| xi * (z + sign * e0) - hi * sign).collect()
    };
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut p = r.clone();
    let mut rho: Complex64 = r.iter().map(|v| v * v).sum();
    for _ in 0..max_iter {
        let q = apply(&p);
        let pq: Complex64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq.norm() == 0.0 {
            break;
        }
        let alpha = rho / pq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        let rn = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if rn < tol * bnorm {
            return Ok(x);
        }
        let rho_new: Complex64 = r.iter().map(|v| v * v).sum();
        let beta = rho_new / rho;
        rho = rho_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    let res = {
        let ax = apply(&x);
        ax.iter().zip(b).map(|(a, &bv)| (a - bv).norm_sqr()).sum::<f64>().sqrt() / bnorm
    };
    if res < tol {
        Ok(x)
    } else {
        Err(GwError::Solver(format!("COCG residual {res:e} at z={z}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigvals, RMat};

    #[test]
    fn one_particle_sector_is_one_body_matrix() {
        let h = RMat::from_row_slice(2, 2, &[0.3, -0.7, -0.7, 0.3]);
        let s = build_sector_with(&h, None, 1, 100).unwrap();
        assert_eq!(s.to_dense(), h);
    }

    #[test]
    fn full_shell() {
        let h = RMat::from_row_slice(2, 2, &[0.3, -0.7, -0.7, 1.1]);
        let v = RMat::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]);
        let s = build_sector_with(&h, Some(&v), 2, 100).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.to_dense()[(0, 0)] - (0.3 + 1.1 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn free_fermions_fill_lowest_levels() {
        let h = RMat::from_fn(4, 4, |i, j| {
            if i == j {
                i as f64 * 0.3
            } else if i.abs_diff(j) == 1 {
                -0.5
            } else {
                0.0
            }
        });
        let eps = sym_eigvals(&h);
        let s = build_sector_with(&h, None, 2, 100).unwrap();
        assert!(s.symmetry_residual() < 1e-12);
        let e = sym_eigvals(&s.to_dense());
        assert!((e[0] - eps[0] - eps[1]).abs() < 1e-12);
    }

    #[test]
    fn lanczos_and_cocg_match_dense() {
        let h = RMat::from_fn(8, 8, |i, j| {
            if i == j {
                (i as f64 - 3.5).powi(2) * 0.1
            } else if i.abs_diff(j) == 1 {
                -0.5
            } else {
                0.0
            }
        });
        let v = RMat::from_fn(8, 8, |i, j| 1.0 / (((i as f64 - j as f64).powi(2)) + 1.0).sqrt());
        let s = build_sector_with(&h, Some(&v), 3, 1000).unwrap();
        let dense = s.to_dense();
        let exact = sym_eigvals(&dense);
        let (vals, vec) = lanczos_lowest(&s, 1e-10, 300, 7).unwrap();
        assert!((vals[0] - exact[0]).abs() < 1e-10);
        assert!((vals[1] - exact[1]).abs() < 1e-8);
        let hv = s.apply(&vec);
        assert!(hv.iter().zip(&vec).all(|(a, b)| (a - exact[0] * b).abs() < 1e-8));

        let z = Complex64::new(0.2, 0.7);
        let b: Vec<f64> = (0..s.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = cocg_shifted(&s, z, 1.0, exact[0], &b, 1e-11, 2000).unwrap();
        let shifted = linalg::to_complex(&dense).map(|v| -v)
            + crate::linalg::CMat::identity(s.dim(), s.dim()) * (z + exact[0]);
        let xv = crate::linalg::CMat::from_column_slice(s.dim(), 1, &x);
        let r = shifted * xv;
        assert!(r.iter().zip(&b).all(|(a, &bb)| (a - bb).norm() < 1e-9));
    }
}
