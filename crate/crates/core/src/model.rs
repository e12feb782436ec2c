//! Lattice discretization of the one-body problem and its mean field.
//!
//! One-body operators (h₁, γ⁰, resolvents, self-energies) are stored as
//! matrices acting on nodal values, which is the same as their matrix in the
//! orthonormal basis of normalized site functions. The Coulomb interaction is
//! stored as its pointwise kernel `V(r_i, r_j)`; the corresponding operator is
//! `h^dim · V`. See [`LatticeModel::weight`].

use serde::{Deserialize, Serialize};

use crate::error::{GwError, Result};
use crate::linalg::{self, RMat, RVec};

pub const GAP_TOL: f64 = 1e-8;
pub const SQRT_FLOOR: f64 = 1e-12;
const HARTREE_MIXING: f64 = 0.5;
const HARTREE_TOL: f64 = 1e-10;
const HARTREE_MAX_ITER: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Potential {
    None,
    /// Softened attractive center of total charge `charge` at the lattice midpoint.
    Well { charge: f64 },
    /// Two softened centers of charge `charge` each, split along the first axis.
    TwoCenter { charge: f64, separation: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum H1Variant {
    Bare,
    /// Hartree term of a supplied density (per unit volume, one value per site).
    HartreeFixed(Vec<f64>),
    /// Hartree term iterated to self-consistency with `n_elec` occupied orbitals.
    HartreeSelfConsistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub sites_per_axis: usize,
    pub spacing: f64,
    pub potential: Potential,
    pub eps_reg: f64,
    pub h1: H1Variant,
    pub n_elec: usize,
}

impl ModelConfig {
    pub fn chain(m: usize, n_elec: usize) -> Self {
        ModelConfig {
            dim: 1,
            sites_per_axis: m,
            spacing: 1.0,
            potential: Potential::Well { charge: n_elec as f64 },
            eps_reg: 1.0,
            h1: H1Variant::HartreeSelfConsistent,
            n_elec,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub dim: usize,
    pub sites_per_axis: usize,
    pub sites: Vec<Vec<f64>>,
    pub spacing: f64,
    pub eps_reg: f64,
    pub v_ext: Vec<f64>,
    /// Coulomb kernel V(r_i, r_j).
    pub coulomb: RMat,
    /// Symmetric square root of the kernel matrix `coulomb`.
    pub coulomb_sqrt: RMat,
    /// Bare one-body operator −½Δ + v_ext.
    pub h0: RMat,
    /// Mean-field one-body operator.
    pub h1: RMat,
}

impl LatticeModel {
    pub fn m(&self) -> usize {
        self.sites.len()
    }

    /// Composition measure h^dim.
    pub fn weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coulomb operator h^dim·V acting on nodal values.
    pub fn coulomb_op(&self) -> RMat {
        &self.coulomb * self.weight()
    }

    /// Square root of the Coulomb operator.
    pub fn coulomb_op_sqrt(&self) -> RMat {
        &self.coulomb_sqrt * self.weight().sqrt()
    }

    /// Index of the mirror image of site `i` (reflection on every axis).
    pub fn mirror(&self, i: usize) -> usize {
        let m = self.sites_per_axis;
        let mut rest = i;
        let mut out = 0;
        let mut stride = 1;
        for _ in 0..self.dim {
            let c = rest % m;
            rest /= m;
            out += (m - 1 - c) * stride;
            stride *= m;
        }
        out
    }

    /// Nearest-neighbour bonds `(i, j)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let m = self.sites_per_axis;
        let mut out = Vec::new();
        let mut stride = 1;
        for _ in 0..self.dim {
            for i in 0..self.m() {
                if (i / stride) % m + 1 < m {
                    out.push((i, i + stride));
                }
            }
            stride *= m;
        }
        out.sort_unstable();
        out
    }
}

fn site_positions(dim: usize, m: usize, h: f64) -> Vec<Vec<f64>> {
    let total = m.pow(dim as u32);
    (0..total)
        .map(|i| {
            let mut rest = i;
            (0..dim)
                .map(|_| {
                    let c = rest % m;
                    rest /= m;
                    c as f64 * h
                })
                .collect()
        })
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn external_potential(pot: &Potential, sites: &[Vec<f64>], center: &[f64], eps: f64) -> Vec<f64> {
    let soft = |r: &[f64], c: &[f64]| 1.0 / (dist2(r, c) + eps * eps).sqrt();
    sites
        .iter()
        .map(|r| match pot {
            Potential::None => 0.0,
            Potential::Well { charge } => -charge * soft(r, center),
            Potential::TwoCenter { charge, separation } => {
                let mut a = center.to_vec();
                let mut b = center.to_vec();
                a[0] -= 0.5 * separation;
                b[0] += 0.5 * separation;
                -charge * (soft(r, &a) + soft(r, &b))
            }
        })
        .collect()
}

/// Second-order finite-difference −½Δ with open (Dirichlet) boundaries.
pub fn kinetic(dim: usize, m: usize, h: f64) -> RMat {
    let total = m.pow(dim as u32);
    let mut t = RMat::zeros(total, total);
    let c = 1.0 / (h * h);
    let mut stride = 1;
    for _ in 0..dim {
        for i in 0..total {
            t[(i, i)] += c;
            if (i / stride) % m + 1 < m {
                t[(i, i + stride)] -= 0.5 * c;
                t[(i + stride, i)] -= 0.5 * c;
            }
        }
        stride *= m;
    }
    t
}

pub fn build_lattice(cfg: &ModelConfig) -> Result<LatticeModel> {
    if !(1..=3).contains(&cfg.dim) {
        return Err(GwError::Input(format!("dim must be 1, 2 or 3, got {}", cfg.dim)));
    }
    let m_total = cfg.sites_per_axis.pow(cfg.dim as u32);
    if m_total < 2 || cfg.sites_per_axis < 1 {
        return Err(GwError::Input(format!("need at least 2 sites, got {m_total}")));
    }
    if m_total > 64 {
        return Err(GwError::Input(format!("at most 64 sites supported, got {m_total}")));
    }
    if !(cfg.spacing > 0.0 && cfg.spacing.is_finite()) {
        return Err(GwError::Input(format!("spacing must be positive, got {}", cfg.spacing)));
    }
    if !(cfg.eps_reg > 0.0 && cfg.eps_reg.is_finite()) {
        return Err(GwError::Input(format!("eps_reg must be positive, got {}", cfg.eps_reg)));
    }
    let h = cfg.spacing;
    let sites = site_positions(cfg.dim, cfg.sites_per_axis, h);
    let center = vec![0.5 * (cfg.sites_per_axis - 1) as f64 * h; cfg.dim];
    let v_ext = external_potential(&cfg.potential, &sites, &center, cfg.eps_reg);

    let eps2 = cfg.eps_reg * cfg.eps_reg;
    let coulomb = RMat::from_fn(m_total, m_total, |i, j| 1.0 / (dist2(&sites[i], &sites[j]) + eps2).sqrt());
    let coulomb_sqrt = linalg::spd_sqrt(&coulomb, SQRT_FLOOR)
        .map_err(|(index, value)| GwError::NonSpdCoulomb { index, value })?;

    let mut h0 = kinetic(cfg.dim, cfg.sites_per_axis, h);
    for (i, v) in v_ext.iter().enumerate() {
        h0[(i, i)] += v;
    }
    let mut model = LatticeModel {
        dim: cfg.dim,
        sites_per_axis: cfg.sites_per_axis,
        sites,
        spacing: h,
        eps_reg: cfg.eps_reg,
        v_ext,
        coulomb,
        coulomb_sqrt,
        h1: h0.clone(),
        h0,
    };
    match &cfg.h1 {
        H1Variant::Bare => {}
        H1Variant::HartreeFixed(rho) => {
            if rho.len() != m_total {
                return Err(GwError::Shape(format!("density has {} entries, expected {m_total}", rho.len())));
            }
            model.h1 = with_potential(&model.h0, &hartree_potential(&model, rho)?);
        }
        H1Variant::HartreeSelfConsistent => {
            model.h1 = self_consistent_hartree(&model, cfg.n_elec)?;
        }
    }
    Ok(model)
}

fn with_potential(h: &RMat, v: &[f64]) -> RMat {
    let mut out = h.clone();
    for (i, x) in v.iter().enumerate() {
        out[(i, i)] += x;
    }
    out
}

/// Discrete ρ ∗ |·|⁻¹: `(V·ρ)·h^dim`.
pub fn hartree_potential(model: &LatticeModel, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != model.m() {
        return Err(GwError::Shape(format!("density has {} entries, expected {}", rho.len(), model.m())));
    }
    if let Some((i, r)) = rho.iter().enumerate().find(|(_, &r)| r < -1e-12) {
        return Err(GwError::Input(format!("negative density {r:e} at site {i}")));
    }
    let v = &model.coulomb * RVec::from_column_slice(rho) * model.weight();
    Ok(v.iter().copied().collect())
}

fn self_consistent_hartree(model: &LatticeModel, n: usize) -> Result<RMat> {
    let mut rho = mean_field_of(&model.h0, model.weight(), n)?.rho0;
    let mut change = f64::INFINITY;
    for _ in 0..HARTREE_MAX_ITER {
        let h1 = with_potential(&model.h0, &hartree_potential(model, &rho)?);
        let out = mean_field_of(&h1, model.weight(), n)?.rho0;
        change = rho.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < HARTREE_TOL {
            return Ok(with_potential(&model.h0, &hartree_potential(model, &out)?));
        }
        for (a, b) in rho.iter_mut().zip(&out) {
            *a = (1.0 - HARTREE_MIXING) * *a + HARTREE_MIXING * b;
        }
    }
    Err(GwError::HartreeNotConverged {
        iterations: HARTREE_MAX_ITER,
        change,
    })
}

#[derive(Clone, Debug)]
pub struct MeanFieldState {
    pub eps: Vec<f64>,
    /// Orthonormal eigenvectors of h₁ as columns.
    pub phi: RMat,
    pub n_elec: usize,
    pub gamma0: RMat,
    /// Density per unit volume, γ⁰_ii / h^dim.
    pub rho0: Vec<f64>,
    pub mu0: f64,
    pub gap: f64,
}

impl MeanFieldState {
    pub fn homo(&self) -> f64 {
        self.eps[self.n_elec - 1]
    }

    pub fn lumo(&self) -> f64 {
        self.eps[self.n_elec]
    }
}

fn mean_field_of(h1: &RMat, weight: f64, n: usize) -> Result<MeanFieldState> {
    let m = h1.nrows();
    if n == 0 || n >= m {
        return Err(GwError::Input(format!("need 1 <= N < M, got N={n}, M={m}")));
    }
    let sym = (h1 + h1.transpose()) * 0.5;
    let (eps, phi) = linalg::sym_eig(&sym);
    let gap = eps[n] - eps[n - 1];
    if gap <= GAP_TOL {
        return Err(GwError::DegenerateFermiLevel { gap, tol: GAP_TOL });
    }
    let occ = phi.columns(0, n);
    let gamma0 = occ * occ.transpose();
    let rho0 = (0..m).map(|i| gamma0[(i, i)] / weight).collect();
    Ok(MeanFieldState {
        mu0: 0.5 * (eps[n - 1] + eps[n]),
        eps,
        phi,
        n_elec: n,
        gamma0,
        rho0,
        gap,
    })
}

pub fn solve_mean_field(model: &LatticeModel, n_elec: usize) -> Result<MeanFieldState> {
    mean_field_of(&model.h1, model.weight(), n_elec)
}

/// Mean field of an explicit one-body matrix with unit composition measure.
pub fn mean_field_from_h1(h1: &RMat, n_elec: usize) -> Result<MeanFieldState> {
    mean_field_of(h1, 1.0, n_elec)
}

/// Discrete gradient used for weak-form `−div(ρ∇·)` comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientStencil {
    /// Centered differences, one-sided at the boundary, evaluated at sites.
    Centered,
    /// Forward differences on bonds with the bond-midpoint density.
    Bond,
}

/// Matrix `D` with `fᵀ D g = Σ ρ (∇f·∇g) h^dim` on nodal values `f`, `g`.
pub fn weak_form_matrix(model: &LatticeModel, rho: &[f64], stencil: GradientStencil) -> RMat {
    let m = model.m();
    let h = model.spacing;
    let w = model.weight();
    let mut d = RMat::zeros(m, m);
    match stencil {
        GradientStencil::Bond => {
            for (i, j) in model.bonds() {
                let c = 0.5 * (rho[i] + rho[j]) * w / (h * h);
                d[(i, i)] += c;
                d[(j, j)] += c;
                d[(i, j)] -= c;
                d[(j, i)] -= c;
            }
        }
        GradientStencil::Centered => {
            let n = model.sites_per_axis;
            let mut stride = 1;
            for _ in 0..model.dim {
                let mut grad = RMat::zeros(m, m);
                for i in 0..m {
                    let c = (i / stride) % n;
                    let (lo, hi) = if c == 0 {
                        (i, i + stride)
                    } else if c + 1 == n {
                        (i - stride, i)
                    } else {
                        (i - stride, i + stride)
                    };
                    let span = ((hi - lo) / stride) as f64 * h;
                    grad[(i, hi)] += 1.0 / span;
                    grad[(i, lo)] -= 1.0 / span;
                }
                let rw = RMat::from_diagonal(&RVec::from_iterator(m, rho.iter().map(|r| r * w)));
                d += grad.transpose() * rw * &grad;
                stride *= n;
            }
        }
    }
    d
}

/// Bond-order form `Σ_b γ_b (Δf)(Δg)/h²` of a one-body density matrix in op form.
pub fn bond_order_matrix(model: &LatticeModel, gamma: &RMat) -> RMat {
    let m = model.m();
    let h2 = model.spacing * model.spacing;
    let mut d = RMat::zeros(m, m);
    for (i, j) in model.bonds() {
        let c = 0.5 * (gamma[(i, j)] + gamma[(j, i)]) / h2;
        d[(i, i)] += c;
        d[(j, j)] += c;
        d[(i, j)] -= c;
        d[(j, i)] -= c;
    }
    d
}

/// Low cosine modes `Π cos(πk(x + h/2)/L)`, `k = 1..=kmax` along each axis,
/// smooth enough to have meaningful finite-difference gradients.
pub fn smooth_probes(model: &LatticeModel, kmax: usize) -> Vec<Vec<f64>> {
    let n = model.sites_per_axis;
    let len = n as f64 * model.spacing;
    let mut out = Vec::new();
    for axis in 0..model.dim {
        let stride = n.pow(axis as u32);
        for k in 1..=kmax {
            out.push(
                (0..model.m())
                    .map(|i| {
                        let c = (i / stride) % n;
                        let x = (c as f64 + 0.5) * model.spacing;
                        (std::f64::consts::PI * k as f64 * x / len).cos()
                    })
                    .collect(),
            );
        }
    }
    out
}

/// `‖Tᵀ(L − D)T‖_F / ‖TᵀLT‖_F` with the probe vectors as columns of `T`.
pub fn projected_mismatch(l: &RMat, d: &RMat, probes: &[Vec<f64>]) -> f64 {
    let m = l.nrows();
    let t = RMat::from_fn(m, probes.len(), |i, c| probes[c][i]);
    let pl = t.transpose() * l * &t;
    let pd = t.transpose() * d * &t;
    (&pl - &pd).norm() / pl.norm()
}
