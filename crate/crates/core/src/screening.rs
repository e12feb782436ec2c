//! RPA screening on the imaginary axis: P⁰_sym, χ⁰_sym and W⁰_c.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GwError, Result};
use crate::freq::{make_grid, FreqGrid, MatrixTrack};
use crate::kernel::odot_op;
use crate::linalg::{self, CMat, RMat};
use crate::model::{LatticeModel, MeanFieldState};

/// Particle–hole transitions of the mean field, enough to evaluate P⁰, χ⁰
/// and W⁰_c in closed form at any complex frequency.
#[derive(Clone, Debug)]
pub struct RpaModel {
    pub weight: f64,
    pub vsqrt: RMat,
    pub mf: MeanFieldState,
    /// `(ε_a − ε_k, V^{1/2}(φ_k c_a))` for occupied `k`, empty `a`.
    transitions: Vec<(f64, Vec<f64>)>,
    /// `(ε_a − ε_k, φ_k c_a)` without the Coulomb factor.
    bare: Vec<(f64, Vec<f64>)>,
}

impl RpaModel {
    pub fn new(model: &LatticeModel, mf: &MeanFieldState) -> Self {
        Self::from_parts(mf, model.weight(), model.coulomb_op_sqrt())
    }

    pub fn from_parts(mf: &MeanFieldState, weight: f64, vsqrt: RMat) -> Self {
        let m = mf.eps.len();
        let n = mf.n_elec;
        let scale = 1.0 / weight.sqrt();
        let mut bare = Vec::new();
        for k in 0..n {
            for a in n..m {
                let u: Vec<f64> = (0..m).map(|i| mf.phi[(i, k)] * mf.phi[(i, a)] * scale).collect();
                bare.push((mf.eps[a] - mf.eps[k], u));
            }
        }
        let transitions = bare
            .iter()
            .map(|(d, u)| {
                let vu = &vsqrt * linalg::RVec::from_column_slice(u);
                (*d, vu.iter().copied().collect())
            })
            .collect();
        RpaModel {
            weight,
            vsqrt,
            mf: mf.clone(),
            transitions,
            bare,
        }
    }

    pub fn m(&self) -> usize {
        self.vsqrt.nrows()
    }

    fn assemble(pairs: &[(f64, Vec<f64>)], z: Complex64, m: usize) -> CMat {
        let mut out = CMat::zeros(m, m);
        for (d, u) in pairs {
            let c = -2.0 * d / (d * d - z * z);
            for j in 0..m {
                let cj = c * u[j];
                for i in 0..m {
                    out[(i, j)] += cj * u[i];
                }
            }
        }
        out
    }

    /// `P̃⁰_sym(z)`; for `z = iω` this is Hermitian and negative semidefinite.
    pub fn p0_sym(&self, z: Complex64) -> CMat {
        Self::assemble(&self.transitions, z, self.m())
    }

    /// `P̃⁰(z) = V^{-1/2} P̃⁰_sym(z) V^{-1/2}`.
    pub fn p0_bare(&self, z: Complex64) -> CMat {
        Self::assemble(&self.bare, z, self.m())
    }

    /// `χ̃⁰_sym(z)`; off the imaginary axis `P⁰` is only complex symmetric and
    /// the inverse is taken directly.
    pub fn chi0(&self, z: Complex64) -> Result<CMat> {
        let p = self.p0_sym(z);
        if z.re == 0.0 {
            return Ok(chi0_of_p0(&p)?.0);
        }
        let id = CMat::identity(p.nrows(), p.ncols());
        Ok(linalg::inverse(&(&id - p))? - id)
    }

    pub fn w0c(&self, z: Complex64) -> Result<CMat> {
        let chi = self.chi0(z)?;
        if z.re == 0.0 {
            return Ok(w0c_of_chi0(&chi, &self.vsqrt));
        }
        let v = linalg::to_complex(&self.vsqrt);
        Ok(&v * chi * &v)
    }

    /// `lim ω² P̃⁰(iω)` as `−2Σ Δ u uᵀ`, sign flipped: the weak-form sum-rule
    /// matrix acting on nodal values.
    pub fn sumrule_limit_matrix(&self) -> RMat {
        let m = self.m();
        let mut out = RMat::zeros(m, m);
        for (d, u) in &self.bare {
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] += 2.0 * d * u[i] * u[j];
                }
            }
        }
        out * self.weight
    }

    /// `(z − h₁)⁻¹` from the mean-field eigenbasis; `z` is the full energy.
    pub fn g0(&self, z: Complex64) -> CMat {
        self.resolvent_part(z, 0..self.mf.eps.len())
    }

    /// Hole part of `G₀`: occupied orbitals only.
    pub fn g0_hole(&self, z: Complex64) -> CMat {
        self.resolvent_part(z, 0..self.mf.n_elec)
    }

    fn resolvent_part(&self, z: Complex64, range: std::ops::Range<usize>) -> CMat {
        let m = self.m();
        let phi = &self.mf.phi;
        let mut out = CMat::zeros(m, m);
        for k in range {
            let c = 1.0 / (z - self.mf.eps[k]);
            for j in 0..m {
                let cj = c * phi[(j, k)];
                for i in 0..m {
                    out[(i, j)] += cj * phi[(i, k)];
                }
            }
        }
        out
    }
}

/// `P̃⁰_sym(iω)` in closed form.
pub fn p0_explicit(rpa: &RpaModel, omega: f64) -> CMat {
    rpa.p0_sym(Complex64::new(0.0, omega))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum P0Parts {
    Full,
    /// Both factors replaced by the hole part of `G₀`.
    HoleHole,
}

/// `(1/2π) ∫ V^{1/2}[G̃₀(μ₀+ν+i(s+ω/2)) ⊙ G̃₀(μ₀+ν+i(s−ω/2))]V^{1/2} ds`.
///
/// The integration variable is centred between the two resolvent peaks and
/// the grid scale widened to `|ω|/2`, keeping the grid's node count. Both
/// factors are closed-form resolvents, so nothing is interpolated.
pub fn p0_convolution_shifted(rpa: &RpaModel, grid: &FreqGrid, omega: f64, nu: f64, parts: P0Parts) -> Result<CMat> {
    let mu = rpa.mf.mu0 + nu;
    let g = |w: f64| {
        let z = Complex64::new(mu, w);
        match parts {
            P0Parts::Full => rpa.g0(z),
            P0Parts::HoleHole => rpa.g0_hole(z),
        }
    };
    let scale = grid.scale.max(0.5 * omega.abs());
    let local = if scale == grid.scale { grid.clone() } else { make_grid(grid.len(), scale)? };
    let wgt = rpa.weight;
    let terms: Vec<CMat> = local
        .nodes
        .par_iter()
        .zip(&local.weights)
        .map(|(&s, &q)| odot_op(&g(s + 0.5 * omega), &g(s - 0.5 * omega), wgt).scale(q))
        .collect();
    let inner = terms
        .into_iter()
        .fold(CMat::zeros(rpa.m(), rpa.m()), |a, b| a + b)
        .unscale(2.0 * std::f64::consts::PI);
    let v = linalg::to_complex(&rpa.vsqrt);
    Ok(&v * inner * &v)
}

pub fn p0_convolution(rpa: &RpaModel, grid: &FreqGrid, omega: f64) -> Result<CMat> {
    p0_convolution_shifted(rpa, grid, omega, 0.0, P0Parts::Full)
}

pub const P0_SIGN_TOL: f64 = 1e-8;

/// `χ⁰ = (1 − P⁰)⁻¹ − 1` through the eigenbasis of `P⁰`, with the condition
/// number of `1 − P⁰`.
pub fn chi0_of_p0(p0: &CMat) -> Result<(CMat, f64)> {
    let (vals, vecs) = linalg::herm_eig(p0);
    let top = *vals.last().unwrap_or(&0.0);
    if top > P0_SIGN_TOL {
        return Err(GwError::PositiveP0(top));
    }
    let f: Vec<f64> = vals.iter().map(|&p| p / (1.0 - p)).collect();
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(f.len(), f.iter().map(|&x| Complex64::new(x, 0.0))));
    let chi = &vecs * d * vecs.adjoint();
    let cond = vals.first().map_or(1.0, |&lo| (1.0 - lo) / (1.0 - top));
    Ok((linalg::hermitian_part(&chi), cond))
}

/// `W⁰_c = V^{1/2} χ⁰ V^{1/2}`.
pub fn w0c_of_chi0(chi0: &CMat, vsqrt: &RMat) -> CMat {
    let v = linalg::to_complex(vsqrt);
    linalg::hermitian_part(&(&v * chi0 * &v))
}

/// Nodewise P⁰, χ⁰ and W⁰_c on a grid.
#[derive(Clone, Debug)]
pub struct ScreeningSet {
    pub rpa: RpaModel,
    pub grid: Arc<FreqGrid>,
    pub p0: MatrixTrack,
    pub chi0: MatrixTrack,
    pub w0c: MatrixTrack,
    /// Condition number of `1 − P⁰` per node.
    pub condition: Vec<f64>,
}

pub fn build_screening(rpa: &RpaModel, grid: Arc<FreqGrid>) -> Result<ScreeningSet> {
    let rows: Vec<(CMat, CMat, CMat, f64)> = grid
        .nodes
        .par_iter()
        .map(|&w| {
            let p = p0_explicit(rpa, w);
            let (chi, cond) = chi0_of_p0(&p)?;
            let wc = w0c_of_chi0(&chi, &rpa.vsqrt);
            Ok((p, chi, wc, cond))
        })
        .collect::<Result<_>>()?;
    let mut p0 = Vec::with_capacity(rows.len());
    let mut chi0 = Vec::with_capacity(rows.len());
    let mut w0c = Vec::with_capacity(rows.len());
    let mut condition = Vec::with_capacity(rows.len());
    for (p, c, w, k) in rows {
        p0.push(p);
        chi0.push(c);
        w0c.push(w);
        condition.push(k);
    }
    Ok(ScreeningSet {
        rpa: rpa.clone(),
        p0: MatrixTrack::new(grid.clone(), p0, 0.0)?,
        chi0: MatrixTrack::new(grid.clone(), chi0, 0.0)?,
        w0c: MatrixTrack::new(grid.clone(), w0c, 0.0)?,
        grid,
        condition,
    })
}

impl ScreeningSet {
    /// Largest violation of `P⁰ ⪯ χ⁰ ⪯ 0` over the nodes.
    pub fn sandwich_violation(&self) -> f64 {
        self.p0
            .values
            .par_iter()
            .zip(&self.chi0.values)
            .map(|(p, c)| {
                let upper = *linalg::herm_eigvals(c).last().unwrap();
                let lower = -linalg::herm_eigvals(&(c - p))[0];
                upper.max(lower)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    /// Largest eigenvalue of any `P⁰`, `χ⁰` or `W⁰_c` sample.
    pub fn max_eigenvalue(&self) -> f64 {
        [&self.p0, &self.chi0, &self.w0c]
            .iter()
            .flat_map(|t| t.values.iter())
            .map(|v| *linalg::herm_eigvals(v).last().unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn evenness_residual(&self) -> f64 {
        self.p0
            .evenness_residual()
            .max(self.chi0.evenness_residual())
            .max(self.w0c.evenness_residual())
    }
}

/// One row of a sum-rule table.
#[derive(Clone, Debug, PartialEq)]
pub struct SumRuleRow {
    pub omega: f64,
    /// `⟨f̄, −ω² X(iω) g⟩`.
    pub value: f64,
    /// Distance to the weak-form gradient pairing.
    pub residual_weak: f64,
    /// Distance to the exact lattice limit.
    pub residual_limit: f64,
}

#[derive(Clone, Debug)]
pub struct SumRuleTable {
    pub rows: Vec<SumRuleRow>,
    pub limit: f64,
    pub weak: f64,
}

impl SumRuleTable {
    pub fn new(omegas: &[f64], value: impl Fn(f64) -> Result<f64>, limit: f64, weak: f64) -> Result<Self> {
        let rows = omegas
            .iter()
            .map(|&w| {
                let v = value(w)?;
                Ok(SumRuleRow {
                    omega: w,
                    value: v,
                    residual_weak: (v - weak).abs(),
                    residual_limit: (v - limit).abs(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(SumRuleTable { rows, limit, weak })
    }

    /// Least-squares slope of `log residual_limit` against `log ω`.
    pub fn decay_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.omega.ln(), r.residual_limit.ln()))
            .collect();
        loglog_slope(&pts)
    }
}

pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `⟨f̄, −ω² P̃⁰(iω) g⟩` against the weak-form `Σ ρ⁰ ∇f·∇g h^dim`.
pub fn sumrule_p0(
    rpa: &RpaModel,
    model: &LatticeModel,
    omegas: &[f64],
    f: &[f64],
    g: &[f64],
    stencil: crate::model::GradientStencil,
) -> Result<SumRuleTable> {
    let m = rpa.m();
    let fv = linalg::RVec::from_column_slice(f);
    let gv = linalg::RVec::from_column_slice(g);
    let limit = fv.dot(&(rpa.sumrule_limit_matrix() * &gv));
    let weak = fv.dot(&(crate::model::weak_form_matrix(model, &rpa.mf.rho0, stencil) * &gv));
    SumRuleTable::new(
        omegas,
        |w| {
            let p = rpa.p0_bare(Complex64::new(0.0, w));
            let v: Complex64 = (0..m)
                .flat_map(|i| (0..m).map(move |j| (i, j)))
                .map(|(i, j)| p[(i, j)] * (f[i] * g[j]))
                .sum();
            Ok(-w * w * v.re * rpa.weight)
        },
        limit,
        weak,
    )
}
