//! The resolvent map `𝔤_λ`, one-shot G₀W⁰ and the Picard iteration for the
//! GW⁰_λ system.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GwError, Result};
use crate::freq::{FreqGrid, MatrixTrack};
use crate::linalg::{self, CMat, RMat};
use crate::model::{LatticeModel, MeanFieldState};
use crate::screening::ScreeningSet;
use crate::self_energy::{exchange_kernel, s_map, s_norm_estimate, GreenEval, RationalProbe, SNorm, SelfEnergySet};

pub const SINGULAR_COND: f64 = 1e12;
/// Residuals below this multiple of `‖G₀‖₂` are left out of the ratio fit.
pub const FIT_FLOOR: f64 = 1e-12;
const FIT_WINDOW: usize = 5;
const GROWTH_LIMIT: usize = 3;
const FALLBACK_MIXING: f64 = 0.5;
const NORM_PROBES: usize = 8;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mixing: f64,
    pub grid: Arc<FreqGrid>,
}

impl SolverConfig {
    pub fn new(grid: Arc<FreqGrid>, lambda: f64) -> Self {
        SolverConfig {
            lambda,
            tol: 1e-8,
            max_iter: 200,
            mixing: 1.0,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(GwError::ConfigField {
                field: "solver.tol".into(),
                msg: format!("must be positive, got {}", self.tol),
            });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(GwError::ConfigField {
                field: "solver.lambda".into(),
                msg: format!("must be a finite value ≥ 0, got {}", self.lambda),
            });
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(GwError::ConfigField {
                field: "solver.mixing".into(),
                msg: format!("must lie in (0, 1], got {}", self.mixing),
            });
        }
        if self.max_iter == 0 {
            return Err(GwError::ConfigField {
                field: "solver.max_iter".into(),
                msg: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverReport {
    pub lambda: f64,
    /// `‖G_{k+1} − G_k‖₂` per iteration.
    pub residuals: Vec<f64>,
    /// Geometric ratio fitted to the last residuals.
    pub contraction: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Mixing in effect at exit.
    pub mixing: f64,
    pub lambda_star_estimate: f64,
    /// `‖G_* − 𝔤_λ∘𝔰[G_*]‖₂` for the returned iterate.
    pub fixed_point_residual: f64,
    pub warnings: Vec<String>,
}

/// `h₁ = Φ diag(ε) Φᵀ`.
pub fn h1_of(mf: &MeanFieldState) -> RMat {
    let d = RMat::from_diagonal(&linalg::RVec::from_column_slice(&mf.eps));
    &mf.phi * d * mf.phi.transpose()
}

/// `dist(μ₀, σ(h₁))`.
pub fn spectral_distance(mf: &MeanFieldState) -> f64 {
    mf.eps.iter().map(|e| (e - mf.mu0).abs()).fold(f64::INFINITY, f64::min)
}

/// A Green's function on `μ₀ + iℝ`: nodal values plus the effective
/// self-energy `Σ_eff = μ₀ + iω − h₁ − G⁻¹`, interpolated between nodes to
/// evaluate `G` anywhere on the line.
#[derive(Clone, Debug)]
pub struct GreenIterate {
    pub track: MatrixTrack,
    pub sigma_eff: MatrixTrack,
    h1: CMat,
}

impl GreenIterate {
    fn assemble(h1: &CMat, mu0: f64, omega: f64, sigma: &CMat) -> CMat {
        let m = h1.nrows();
        CMat::identity(m, m) * Complex64::new(mu0, omega) - h1 - sigma
    }

    /// Nodewise inverse of `μ₀ + iω_j − h₁ − Σ_j`.
    pub fn from_sigma(sigma_eff: MatrixTrack, h1: &RMat, mu0: f64, lambda: f64) -> Result<Self> {
        let h1c = linalg::to_complex(h1);
        let grid = sigma_eff.grid.clone();
        let values = grid
            .nodes
            .par_iter()
            .zip(&sigma_eff.values)
            .map(|(&w, s)| {
                let a = Self::assemble(&h1c, mu0, w, s);
                match linalg::inverse_cond(&a) {
                    Some((inv, cond)) if cond <= SINGULAR_COND => Ok(inv),
                    Some((_, cond)) => Err(GwError::Singular { omega: w, lambda, cond }),
                    None => Err(GwError::Singular {
                        omega: w,
                        lambda,
                        cond: f64::INFINITY,
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let track = MatrixTrack::new(grid, values, mu0)?;
        let mut sigma_eff = sigma_eff;
        sigma_eff.axis_offset = mu0;
        Ok(GreenIterate { track, sigma_eff, h1: h1c })
    }

    /// Wraps nodal `G` values, recovering `Σ_eff` by Dyson inversion.
    pub fn from_track(track: MatrixTrack, h1: &RMat) -> Result<Self> {
        let sigma_eff = dyson_inverse(&track, h1)?;
        Ok(GreenIterate {
            track,
            sigma_eff,
            h1: linalg::to_complex(h1),
        })
    }

    pub fn mu0(&self) -> f64 {
        self.track.axis_offset
    }
}

impl GreenEval for GreenIterate {
    fn track(&self) -> &MatrixTrack {
        &self.track
    }

    fn eval(&self, omega: f64) -> CMat {
        let a = Self::assemble(&self.h1, self.mu0(), omega, &self.sigma_eff.interpolate(omega));
        linalg::inverse(&a).unwrap_or_else(|_| CMat::from_element(a.nrows(), a.ncols(), Complex64::new(f64::NAN, f64::NAN)))
    }
}

/// `𝔤_λ[Σ](μ₀+iω_j) = [μ₀ + iω_j − h₁ − λΣ(ω_j)]⁻¹`.
pub fn g_lambda(sigma: &SelfEnergySet, mf: &MeanFieldState, lambda: f64) -> Result<GreenIterate> {
    let eff = sigma.total().scale(lambda);
    GreenIterate::from_sigma(eff, &h1_of(mf), mf.mu0, lambda)
}

/// `G̃₀(μ₀+iω) = (μ₀ + iω − h₁)⁻¹`.
pub fn g0_iterate(mf: &MeanFieldState, grid: Arc<FreqGrid>) -> Result<GreenIterate> {
    let m = mf.eps.len();
    let zero = MatrixTrack::new(grid.clone(), vec![CMat::zeros(m, m); grid.len()], mf.mu0)?;
    GreenIterate::from_sigma(zero, &h1_of(mf), mf.mu0, 0.0)
}

/// `Σ̃(z) = (z − h₁) − G̃(z)⁻¹` on the track's own axis.
pub fn dyson_inverse(g: &MatrixTrack, h1: &RMat) -> Result<MatrixTrack> {
    let h1c = linalg::to_complex(h1);
    let m = h1.nrows();
    let nu = g.axis_offset;
    let values = g
        .grid
        .nodes
        .par_iter()
        .zip(&g.values)
        .map(|(&w, gv)| {
            let inv = linalg::inverse_cond(gv)
                .filter(|(_, c)| *c <= SINGULAR_COND)
                .ok_or(GwError::Singular {
                    omega: w,
                    lambda: f64::NAN,
                    cond: f64::INFINITY,
                })?
                .0;
            Ok(CMat::identity(m, m) * Complex64::new(nu, w) - &h1c - inv)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixTrack::new(g.grid.clone(), values, nu)
}

pub fn dyson_inverse_diagnostic(g: &MatrixTrack, mf: &MeanFieldState) -> Result<MatrixTrack> {
    dyson_inverse(g, &h1_of(mf))
}

/// `K_M/√(ω²+1)` bound on `‖𝔤_λ[Σ](μ₀+iω)‖` given `‖Σ‖_sup ≤ sigma_sup`;
/// `None` outside the regime `λ‖Σ‖ < d`.
pub fn resolvent_bound_constant(d: f64, lambda: f64, sigma_sup: f64) -> Option<f64> {
    let shrink = d - lambda * sigma_sup;
    (shrink > 0.0).then(|| d / shrink * 1.0f64.max(1.0 / d))
}

/// The constants entering the contraction radius and `λ_*`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContractionBounds {
    pub s_norm: f64,
    pub s_norm_bound: f64,
    pub g0_l2: f64,
    pub kx_norm: f64,
    pub s_g0_sup: f64,
    pub d: f64,
    pub m: f64,
    pub lambda_m: f64,
    pub k_m: f64,
    pub c_m: f64,
    pub r: f64,
    pub lambda_star: f64,
}

impl ContractionBounds {
    pub fn new(norm: SNorm, g0_l2: f64, kx_norm: f64, s_g0_sup: f64, d: f64) -> Self {
        let s = norm.probed;
        let m = 1.1 * (kx_norm + s * g0_l2);
        let r = (m - kx_norm) / s - g0_l2;
        let lambda_m = 0.5 * d / m;
        let k_m = 2.0 * 1.0f64.max(1.0 / d);
        let c_m = k_m * (1.0 + std::f64::consts::PI.sqrt());
        let lambda_star = lambda_m
            .min(1.0 / (c_m * c_m * (s * r + s_g0_sup)))
            .min(0.99 / (c_m * c_m * s));
        ContractionBounds {
            s_norm: s,
            s_norm_bound: norm.bound,
            g0_l2,
            kx_norm,
            s_g0_sup,
            d,
            m,
            lambda_m,
            k_m,
            c_m,
            r,
            lambda_star,
        }
    }
}

/// Everything fixed across a GW⁰ run: `W⁰_c`, `K_x`, `G₀` and the bounds.
#[derive(Clone, Debug)]
pub struct GwProblem {
    pub screening: ScreeningSet,
    pub kx: RMat,
    pub g0: GreenIterate,
    pub sigma00: SelfEnergySet,
    pub bounds: ContractionBounds,
}

impl GwProblem {
    pub fn new(model: &LatticeModel, screening: ScreeningSet, seed: u64) -> Result<Self> {
        let mf = &screening.rpa.mf;
        let kx = exchange_kernel(&mf.gamma0, &model.coulomb);
        Self::from_parts(kx, screening, seed)
    }

    pub fn from_parts(kx: RMat, screening: ScreeningSet, seed: u64) -> Result<Self> {
        let mf = &screening.rpa.mf;
        let g0 = g0_iterate(mf, screening.grid.clone())?;
        let sigma00 = s_map(&g0, &screening, &kx)?;
        let norm = s_norm_estimate(&screening, NORM_PROBES, seed)?;
        let bounds = ContractionBounds::new(
            norm,
            g0.track.norm_l2(),
            linalg::op_norm_r(&kx),
            sigma00.total().norm_sup(),
            spectral_distance(mf),
        );
        Ok(GwProblem {
            screening,
            kx,
            g0,
            sigma00,
            bounds,
        })
    }

    pub fn mf(&self) -> &MeanFieldState {
        &self.screening.rpa.mf
    }

    pub fn grid(&self) -> &Arc<FreqGrid> {
        &self.screening.grid
    }

    pub fn s_map(&self, g: &impl GreenEval) -> Result<SelfEnergySet> {
        s_map(g, &self.screening, &self.kx)
    }

    pub fn g_lambda(&self, sigma: &SelfEnergySet, lambda: f64) -> Result<GreenIterate> {
        g_lambda(sigma, self.mf(), lambda)
    }

    /// `Σ⁰⁰ = 𝔰[G₀]` and `𝔤₁[Σ⁰⁰]`.
    pub fn one_shot(&self) -> Result<(SelfEnergySet, GreenIterate)> {
        let g = self.g_lambda(&self.sigma00, 1.0)?;
        Ok((self.sigma00.clone(), g))
    }

    /// `G₀ + δ` with a random rational `δ` of grid norm `size`.
    pub fn perturbed_start(&self, size: f64, seed: u64) -> Result<GreenIterate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = RationalProbe::random(self.grid().clone(), self.mf().eps.len(), self.mf().gap, &mut rng)?;
        let delta = p.track.scale(size / p.track.norm_l2());
        let mut t = self.g0.track.add(&delta);
        t.axis_offset = self.mf().mu0;
        GreenIterate::from_track(t, &h1_of(self.mf()))
    }

    pub fn picard(&self, cfg: &SolverConfig) -> Result<(GreenIterate, SelfEnergySet, SolverReport)> {
        self.picard_from(cfg, self.g0.clone())
    }

    /// `G_{k+1} = (1−α)G_k + α 𝔤_λ∘𝔰[G_k]` until `‖𝔤_λ∘𝔰[G_k] − G_k‖₂ < tol`.
    /// The accepted iterate is the last one whose fixed-point residual was
    /// measured.
    pub fn picard_from(&self, cfg: &SolverConfig, start: GreenIterate) -> Result<(GreenIterate, SelfEnergySet, SolverReport)> {
        cfg.validate()?;
        start.track.check_same_grid(&self.g0.track)?;
        let h1 = h1_of(self.mf());
        let mut warnings = Vec::new();
        if cfg.lambda > self.bounds.lambda_star {
            warnings.push(format!(
                "λ = {} exceeds the contraction estimate λ_* = {:.3e}",
                cfg.lambda, self.bounds.lambda_star
            ));
        }
        let mut mixing = cfg.mixing;
        let mut fell_back = false;
        let mut g = start.clone();
        let mut residuals = Vec::new();
        let mut growth = 0;
        let mut converged = false;
        let mut fp = f64::INFINITY;
        let mut sigma = self.s_map(&g)?;
        for _ in 0..cfg.max_iter {
            let next = self.g_lambda(&sigma, cfg.lambda)?;
            let diff = next.track.sub(&g.track).norm_l2();
            fp = diff;
            let step = mixing * diff;
            if !step.is_finite() {
                return Err(GwError::NonFinite(format!("Picard residual at λ = {}", cfg.lambda)));
            }
            if residuals.last().is_some_and(|&r| step > r) {
                growth += 1;
            } else {
                growth = 0;
            }
            residuals.push(step);
            if diff < cfg.tol {
                converged = true;
                break;
            }
            if growth >= GROWTH_LIMIT {
                if fell_back || mixing <= FALLBACK_MIXING {
                    return Err(GwError::Divergence { lambda: cfg.lambda, mixing });
                }
                warnings.push(format!(
                    "residual grew {GROWTH_LIMIT} times in a row; restarting with mixing {FALLBACK_MIXING}"
                ));
                mixing = FALLBACK_MIXING;
                fell_back = true;
                growth = 0;
                g = start.clone();
                sigma = self.s_map(&g)?;
                continue;
            }
            g = if mixing == 1.0 {
                next
            } else {
                let mut t = g.track.scale(1.0 - mixing).add(&next.track.scale(mixing));
                t.axis_offset = self.mf().mu0;
                GreenIterate::from_track(t, &h1)?
            };
            sigma = self.s_map(&g)?;
        }
        if !converged {
            warnings.push(format!("no convergence after {} iterations", cfg.max_iter));
        }
        if g.track.conjugation_residual() > 1e-10 {
            warnings.push(format!("iterate conjugation residual {:e}", g.track.conjugation_residual()));
        }
        let report = SolverReport {
            lambda: cfg.lambda,
            contraction: fit_ratio(&residuals, FIT_FLOOR * self.bounds.g0_l2),
            iterations: residuals.len(),
            residuals,
            converged,
            mixing,
            lambda_star_estimate: self.bounds.lambda_star,
            fixed_point_residual: fp,
            warnings,
        };
        Ok((g, sigma, report))
    }

    /// `‖G − 𝔤_λ∘𝔰[G]‖₂`.
    pub fn fixed_point_residual(&self, g: &GreenIterate, lambda: f64) -> Result<f64> {
        let next = self.g_lambda(&self.s_map(g)?, lambda)?;
        Ok(next.track.sub(&g.track).norm_l2())
    }
}

/// `exp` of the least-squares slope of `log r_k` over the last few
/// residuals above `floor`.
pub fn fit_ratio(residuals: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > floor)
        .map(|(k, &r)| (k as f64, r.ln()))
        .collect();
    let tail = &pts[pts.len().saturating_sub(FIT_WINDOW)..];
    (tail.len() >= 2).then(|| crate::screening::loglog_slope(tail).exp())
}

pub fn one_shot_g0w0(model: &LatticeModel, screening: ScreeningSet, seed: u64) -> Result<(SelfEnergySet, GreenIterate)> {
    GwProblem::new(model, screening, seed)?.one_shot()
}

pub fn picard_solve(
    model: &LatticeModel,
    screening: ScreeningSet,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(GreenIterate, SelfEnergySet, SolverReport)> {
    GwProblem::new(model, screening, seed)?.picard(cfg)
}
