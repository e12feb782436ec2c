//! Reference computations written directly from the definitions, sharing no
//! code with the `gw0lab` core. The acceptance run compares the core against
//! these.

use std::collections::HashMap;
use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_r(a: &RMat) -> f64 {
    a.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

pub fn complex(a: &RMat) -> CMat {
    a.map(|x| c(x, 0.0))
}

/// Ascending eigenvalues of the Hermitian part.
pub fn herm_eigs(a: &CMat) -> Vec<f64> {
    let h = (a + a.adjoint()).scale(0.5);
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Ascending eigenpairs of a real symmetric matrix.
pub fn eig(a: &RMat) -> (Vec<f64>, RMat) {
    let se = SymmetricEigen::new(a.clone());
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = RMat::from_fn(a.nrows(), a.ncols(), |r, k| se.eigenvectors[(r, idx[k])]);
    (vals, vecs)
}

/// Projector on the `n` lowest eigenvectors.
pub fn aufbau_projector(h: &RMat, n: usize) -> RMat {
    let (_, phi) = eig(h);
    let occ = phi.columns(0, n);
    occ * occ.transpose()
}

/// Least-squares slope.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Geometric ratio from the last five residuals above `floor`.
pub fn fit_ratio(res: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = res
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > floor)
        .map(|(i, r)| (i as f64, r.ln()))
        .collect();
    let tail = &pts[pts.len().saturating_sub(5)..];
    (tail.len() >= 2).then(|| slope(tail).exp())
}

fn parity_sign(word: u64, i: usize) -> f64 {
    if (word & ((1u64 << i) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `a_i Ψ` for every site; `psi` is indexed like `words`.
pub fn annihilated(psi: &[f64], words: &[u64], m: usize) -> Vec<HashMap<u64, f64>> {
    (0..m)
        .map(|i| {
            let mut out = HashMap::new();
            for (&w, &v) in words.iter().zip(psi) {
                if w >> i & 1 == 1 {
                    *out.entry(w ^ (1 << i)).or_insert(0.0) += parity_sign(w, i) * v;
                }
            }
            out
        })
        .collect()
}

/// `a†_i Ψ` for every site.
pub fn created(psi: &[f64], words: &[u64], m: usize) -> Vec<HashMap<u64, f64>> {
    (0..m)
        .map(|i| {
            let mut out = HashMap::new();
            for (&w, &v) in words.iter().zip(psi) {
                if w >> i & 1 == 0 {
                    *out.entry(w | (1 << i)).or_insert(0.0) += parity_sign(w, i) * v;
                }
            }
            out
        })
        .collect()
}

/// `⟨x_i, x_j⟩` of sparse Fock vectors.
pub fn gram(cols: &[HashMap<u64, f64>]) -> RMat {
    let m = cols.len();
    RMat::from_fn(m, m, |i, j| cols[i].iter().map(|(w, v)| v * cols[j].get(w).copied().unwrap_or(0.0)).sum())
}

/// Ascending `n`-particle words on `m` sites.
pub fn words(m: usize, n: u32) -> Vec<u64> {
    (0u64..1 << m).filter(|w| w.count_ones() == n).collect()
}

/// `Σ_bonds γ_ij (f_i − f_j)(g_i − g_j) / h²` on an open chain.
pub fn chain_bond_limit(gamma: &RMat, h: f64) -> RMat {
    let m = gamma.nrows();
    let mut l = RMat::zeros(m, m);
    for i in 0..m - 1 {
        let t = gamma[(i, i + 1)] / (h * h);
        l[(i, i)] += t;
        l[(i + 1, i + 1)] += t;
        l[(i, i + 1)] -= t;
        l[(i + 1, i)] -= t;
    }
    l
}

/// `h Σ ρ_i f′_i g′_i` with centred differences, one-sided at the ends.
pub fn chain_weak_form(rho: &[f64], h: f64) -> RMat {
    let m = rho.len();
    let grad = RMat::from_fn(m, m, |i, j| {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == m - 1 {
            (m - 2, m - 1)
        } else {
            (i - 1, i + 1)
        };
        let span = (hi - lo) as f64 * h;
        if j == hi {
            1.0 / span
        } else if j == lo {
            -1.0 / span
        } else {
            0.0
        }
    });
    grad.transpose() * RMat::from_diagonal(&DVector::from_iterator(m, rho.iter().map(|r| r * h))) * grad
}

/// `cos(πk(x + h/2)/L)`, `k = 1..=kmax`, on an `m`-site chain.
pub fn chain_cosines(m: usize, h: f64, kmax: usize) -> Vec<Vec<f64>> {
    let len = m as f64 * h;
    (1..=kmax)
        .map(|k| (0..m).map(|i| (PI * k as f64 * (i as f64 + 0.5) * h / len).cos()).collect())
        .collect()
}

/// `‖Tᵀ(L − D)T‖_F / ‖TᵀLT‖_F` over the columns `T` of `probes`.
pub fn relative_on_probes(l: &RMat, d: &RMat, probes: &[Vec<f64>]) -> f64 {
    let t = RMat::from_fn(l.nrows(), probes.len(), |i, k| probes[k][i]);
    let pl = t.transpose() * l * &t;
    let pd = t.transpose() * d * &t;
    (&pl - &pd).norm() / pl.norm()
}

/// `P⁰_sym(iω) = −Σ_{k occ, a virt} 2Δ/(Δ² + ω²) (V^{1/2}u)(V^{1/2}u)ᵀ` with
/// `u = φ_kφ_a/√w`.
pub fn p0_sum_over_states(h1: &RMat, vsqrt: &RMat, weight: f64, n: usize, omega: f64) -> CMat {
    let (eps, phi) = eig(h1);
    let m = eps.len();
    let sw = weight.sqrt();
    let mut p = RMat::zeros(m, m);
    for k in 0..n {
        for a in n..m {
            let d = eps[a] - eps[k];
            let u = DVector::from_fn(m, |i, _| phi[(i, k)] * phi[(i, a)] / sw);
            let vu = vsqrt * u;
            p -= (&vu * vu.transpose()) * (2.0 * d / (d * d + omega * omega));
        }
    }
    complex(&p)
}

/// `sup_{E ≥ Δ} E/(ω² + E²)`.
pub fn transition_sup(omega: f64, gap: f64) -> f64 {
    let w = omega.abs();
    if w >= gap {
        0.5 / w
    } else {
        gap / (w * w + gap * gap)
    }
}

/// Nodes and weights of `∫_ℝ dω` through `ω = s·tan(πt/2)`, `t ∈ (−1, 1)`.
pub fn tangent_rule(k: usize, s: f64) -> Vec<(f64, f64)> {
    let q = GaussLegendre::new(k.try_into().expect("k > 0"));
    q.nodes()
        .zip(q.weights())
        .map(|(&t, &wt)| {
            let th = 0.5 * PI * t;
            (s * th.tan(), wt * 0.5 * PI * s / th.cos().powi(2))
        })
        .collect()
}

/// `(z − h)⁻¹`.
pub fn resolvent(h: &RMat, z: Complex64) -> CMat {
    let m = h.nrows();
    (CMat::identity(m, m) * z - complex(h)).try_inverse().expect("z off the spectrum")
}
