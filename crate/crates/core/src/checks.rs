//! Invariant checks run by the pipeline, grouped into named suites.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fock::{ExactOracle, OracleOptions};
use crate::freq::{hilbert_transform, hilbert_transform_periodic, make_grid, plemelj_residual, uniform_window, FreqGrid, HILBERT_PAD};
use crate::kernel::{adjoint_identity_check, odot, Kernel};
use crate::linalg::{self, CMat, RMat, RVec};
use crate::model::{bond_order_matrix, projected_mismatch, smooth_probes, weak_form_matrix, GradientStencil, LatticeModel, MeanFieldState};
use crate::screening::{loglog_slope, p0_convolution, p0_convolution_shifted, p0_explicit, P0Parts, RpaModel, ScreeningSet};
use crate::self_energy::{contour_shift_check, exchange_kernel, sigma_c_at};
use crate::solver::{dyson_inverse_diagnostic, GwProblem, SolverConfig, SolverReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tol: f64,
    pub detail: String,
}

impl CheckResult {
    /// Passes when `value < tol`.
    pub fn below(suite: &str, name: &str, value: f64, tol: f64) -> Self {
        Self::judged(suite, name, value, tol, value < tol)
    }

    /// Passes when `value > tol`.
    pub fn above(suite: &str, name: &str, value: f64, tol: f64) -> Self {
        Self::judged(suite, name, value, tol, value > tol)
    }

    pub fn judged(suite: &str, name: &str, value: f64, tol: f64, pass: bool) -> Self {
        CheckResult {
            suite: suite.into(),
            name: name.into(),
            status: if pass && !value.is_nan() { Status::Pass } else { Status::Fail },
            value,
            tol,
            detail: String::new(),
        }
    }

    pub fn skipped(suite: &str, name: &str, why: &str) -> Self {
        CheckResult {
            suite: suite.into(),
            name: name.into(),
            status: Status::Skipped,
            value: f64::NAN,
            tol: f64::NAN,
            detail: why.into(),
        }
    }

    pub fn failed(suite: &str, name: &str, err: &crate::GwError) -> Self {
        CheckResult {
            suite: suite.into(),
            name: name.into(),
            status: Status::Fail,
            value: f64::NAN,
            tol: f64::NAN,
            detail: err.to_string(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

fn guard(suite: &str, name: &str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| CheckResult::failed(suite, name, &e))
}

pub fn mean_field(mf: &MeanFieldState) -> Vec<CheckResult> {
    let s = "mean-field";
    let g = &mf.gamma0;
    vec![
        CheckResult::below(s, "idempotency", linalg::max_abs_diff_r(&(g * g), g), 1e-12),
        CheckResult::below(s, "trace", (g.trace() - mf.n_elec as f64).abs(), 1e-12),
        CheckResult::above(s, "gap", mf.gap, crate::model::GAP_TOL),
    ]
}

/// `max |x|` over four operator identities of `A₊*` and `A₋` plus `B*Ψ = 0`.
pub fn oracle_identities(o: &ExactOracle) -> f64 {
    let m = o.m();
    let id = RMat::identity(m, m);
    let g = &o.ground.gamma;
    let p = o.maps.particle_gram();
    let h = o.maps.hole_gram();
    linalg::max_abs_diff_r(&p, &(&id - g))
        .max(linalg::max_abs_diff_r(&h, g))
        .max(linalg::max_abs_diff_r(&(&p + &h), &id))
        .max(o.fluctuation_overlap())
}

/// Largest relative error of `∫ ⟨f|Re G̃_p(μ+iω)|f⟩ dω = −π⟨f|1−γ|f⟩` over
/// random `f`.
pub fn green_sum_rule(o: &ExactOracle, grid: &FreqGrid, probes: usize, seed: u64) -> Result<f64> {
    let m = o.m();
    let mu = o.window.mu;
    let gp: Vec<CMat> = grid
        .nodes
        .iter()
        .map(|&w| o.green_particle(Complex64::new(mu, w)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = RMat::identity(m, m);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let f = RVec::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let fc = linalg::to_complex(&RMat::from_column_slice(m, 1, f.as_slice()));
        let quad: f64 = gp
            .iter()
            .zip(&grid.weights)
            .map(|(g, q)| q * (fc.adjoint() * g * &fc)[(0, 0)].re)
            .sum();
        let want = -std::f64::consts::PI * f.dot(&((&id - &o.ground.gamma) * &f));
        worst = worst.max(((quad - want) / want).abs());
    }
    Ok(worst)
}

/// `max |G̃(z) − (z − h)⁻¹|` at five points of `μ + iℝ` for the oracle built
/// without interaction on the one-body operator `h`.
pub fn noninteracting_limit(h: &RMat, weight: f64, n: usize) -> Result<f64> {
    let m = h.nrows();
    let o = ExactOracle::from_parts(
        h.clone(),
        None,
        weight,
        RMat::identity(m, m),
        n,
        &OracleOptions {
            interacting: false,
            ..Default::default()
        },
    )?;
    let mu = o.window.mu;
    let hc = linalg::to_complex(h);
    let mut worst = 0.0f64;
    for w in [-3.0, -0.5, 0.1, 1.0, 10.0] {
        let z = Complex64::new(mu, w);
        let want = linalg::inverse(&(CMat::identity(m, m) * z - &hc))?;
        worst = worst.max(linalg::max_abs_diff(&o.exact_green(z)?, &want));
    }
    Ok(worst)
}

/// `|𝒜_p(ℝ) + 𝒜_h(ℝ) − Id|` and `|𝒜_h(ℝ) − γ|`, worst of the two.
pub fn spectral_sum_rule(o: &ExactOracle) -> Result<f64> {
    let bins = o.spectral_measure(&[(f64::NEG_INFINITY, f64::INFINITY)])?;
    let m = o.m();
    let total = &bins[0].particle + &bins[0].hole;
    Ok(linalg::max_abs_diff_r(&total, &RMat::identity(m, m)).max(linalg::max_abs_diff_r(&bins[0].hole, &o.ground.gamma)))
}

pub fn oracle(model: &LatticeModel, o: &ExactOracle, grid_scale: f64, seed: u64) -> Vec<CheckResult> {
    let s = "oracle";
    let e = o.energy();
    let mut out = vec![CheckResult::below(s, "apm-identities", oracle_identities(o), 1e-10)];
    out.push(guard(s, "noninteracting-limit", {
        noninteracting_limit(&model.h1, model.weight(), o.ground.n).map(|v| CheckResult::below(s, "noninteracting-limit", v, 1e-8))
    }));
    out.push(guard(s, "green-sum-rule", {
        make_grid(256, grid_scale)
            .and_then(|g| green_sum_rule(o, &g, 10, seed))
            .map(|v| CheckResult::below(s, "green-sum-rule", v, 1e-4))
    }));
    out.push(guard(s, "spectral-sum-rule", spectral_sum_rule(o).map(|v| CheckResult::below(s, "spectral-sum-rule", v, 1e-10))));
    out.push(guard(s, "galitskii-migdal", {
        o.galitskii_migdal()
            .map(|gm| CheckResult::below(s, "galitskii-migdal", ((gm - e) / e).abs(), 1e-8))
    }));
    out.push(CheckResult::below(
        s,
        "energy-decomposition",
        ((o.energy_decomposition() - e) / e).abs(),
        1e-8,
    ));
    out
}

/// Frequencies `{50, 100, 200}·gap` of the large-ω sum-rule checks.
pub fn sum_rule_omegas(gap: f64) -> [f64; 3] {
    [50.0 * gap, 100.0 * gap, 200.0 * gap]
}

pub fn johnson(model: &LatticeModel, o: &ExactOracle, gap: f64) -> Vec<CheckResult> {
    let s = "sum-rules";
    let probes = smooth_probes(model, 3);
    let f = &probes[0];
    let mut out = Vec::new();
    out.push(guard(s, "johnson-slope", {
        o.johnson_sum_rule(model, &sum_rule_omegas(gap), f, f, GradientStencil::Centered)
            .map(|t| {
                let slope = t.decay_slope();
                CheckResult::below(s, "johnson-slope", ((slope + 2.0) / 2.0).abs(), 0.2)
                    .with_detail(format!("slope {slope:.4}"))
            })
    }));
    let l = o.johnson_limit_matrix();
    out.push(CheckResult::below(
        s,
        "johnson-lattice-identity",
        linalg::max_abs_diff_r(&l, &bond_order_matrix(model, &o.ground.gamma)),
        1e-6,
    ));
    let d = weak_form_matrix(model, &o.ground.rho, GradientStencil::Centered);
    out.push(
        CheckResult::below(s, "johnson-weak-form", projected_mismatch(&l, &d, &probes), 5e-2)
            .with_detail("centered differences on smooth probes; O(h²) in the spacing"),
    );
    out
}

pub fn p0_sum_rules(model: &LatticeModel, rpa: &RpaModel) -> Vec<CheckResult> {
    let s = "sum-rules";
    let l = rpa.sumrule_limit_matrix();
    let f = &smooth_probes(model, 1)[0];
    let fv = RVec::from_column_slice(f);
    let limit = fv.dot(&(&l * &fv));
    let pts: Vec<(f64, f64)> = sum_rule_omegas(rpa.mf.gap)
        .iter()
        .map(|&w| {
            let p = linalg::real_part(&rpa.p0_bare(Complex64::new(0.0, w)));
            let v = -w * w * fv.dot(&(p * &fv)) * rpa.weight;
            (w.ln(), (v - limit).abs().ln())
        })
        .collect();
    let slope = loglog_slope(&pts);
    vec![
        CheckResult::below(s, "p0-slope", ((slope + 2.0) / 2.0).abs(), 0.2).with_detail(format!("slope {slope:.4}")),
        CheckResult::below(
            s,
            "p0-lattice-identity",
            linalg::max_abs_diff_r(&l, &bond_order_matrix(model, &rpa.mf.gamma0)),
            1e-6,
        ),
    ]
}

fn random_psd(m: usize, rng: &mut impl Rng) -> CMat {
    let x = CMat::from_fn(m, m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&x * x.adjoint()).unscale(m as f64)
}

/// Smallest eigenvalue of `A ⊙ B` and largest adjoint-identity residual over
/// random positive semidefinite pairs of size at most 16.
pub fn kernel_positivity(pairs: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    let mut adj = 0.0f64;
    for _ in 0..pairs {
        let m = rng.random_range(1..=16);
        let w = [1.0, 0.5, 0.125][rng.random_range(0..3)];
        let a = Kernel::new(random_psd(m, &mut rng), w)?;
        let b = Kernel::new(random_psd(m, &mut rng), w)?;
        let c = odot(&a, &b)?;
        min_eig = min_eig.min(linalg::herm_eigvals(&linalg::hermitian_part(&c.mat))[0]);
        let g = Kernel::new(CMat::from_fn(m, m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))), w)?;
        adj = adj.max(adjoint_identity_check(&a, &g)?);
    }
    Ok((min_eig, adj))
}

pub fn kernel(seed: u64) -> Vec<CheckResult> {
    let s = "kernel";
    match kernel_positivity(100, seed) {
        Ok((e, a)) => vec![
            CheckResult::above(s, "positivity", e, -1e-12),
            CheckResult::below(s, "adjoint", a, 1e-14),
        ],
        Err(e) => vec![CheckResult::failed(s, "positivity", &e)],
    }
}

/// Lorentzian pair error on `|ω| ≤ 10`, `ℌ² + Id` on a padded window and the
/// Plemelj residual of an anti-causal input.
pub fn hilbert_residuals() -> Result<(f64, f64, f64)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let w = uniform_window(-200.0, 200.0, 1 << 14);
    let f: Vec<Complex64> = w.iter().map(|&x| c(1.0 / (x * x + 1.0))).collect();
    let h = hilbert_transform(&w, &f)?;
    let pair = w
        .iter()
        .zip(&h)
        .filter(|(x, _)| x.abs() <= 10.0)
        .map(|(&x, v)| (v - c(x / (x * x + 1.0))).norm())
        .fold(0.0, f64::max);
    let mut padded = f.clone();
    padded.resize(f.len() * HILBERT_PAD, c(0.0));
    let mean = padded.iter().sum::<Complex64>() / padded.len() as f64;
    let centred: Vec<Complex64> = padded.iter().map(|v| v - mean).collect();
    let twice = hilbert_transform_periodic(&hilbert_transform_periodic(&centred)?)?;
    let square = twice.iter().zip(&centred).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
    let anti: Vec<Complex64> = w.iter().map(|&x| 1.0 / Complex64::new(x, -1.0)).collect();
    Ok((pair, square, plemelj_residual(&w, &anti)?))
}

pub fn hilbert() -> Vec<CheckResult> {
    let s = "hilbert";
    match hilbert_residuals() {
        Ok((p, q, a)) => vec![
            CheckResult::below(s, "lorentzian-pair", p, 1e-3),
            CheckResult::below(s, "square-is-minus-identity", q, 1e-3),
            CheckResult::above(s, "anticausal-discrimination", a, 0.5),
        ],
        Err(e) => vec![CheckResult::failed(s, "lorentzian-pair", &e)],
    }
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

/// Grid nodes closest to `gap`, `10·gap` and `100·gap`.
pub fn decay_nodes(sc: &ScreeningSet) -> [usize; 3] {
    let gap = sc.rpa.mf.gap;
    let nearest = |t: f64| {
        (0..sc.grid.len())
            .min_by(|&a, &b| (sc.grid.nodes[a] - t).abs().total_cmp(&(sc.grid.nodes[b] - t).abs()))
            .unwrap_or(0)
    };
    [nearest(gap), nearest(10.0 * gap), nearest(100.0 * gap)]
}

/// Worst violation of `0 ≤ −X(iω) ≤ 2 s(ω) V^{1/2}ρ₀V^{1/2}` for `X = P⁰, χ⁰`
/// at the decay nodes, relative to `‖V^{1/2}ρ₀V^{1/2}‖`; `s` is
/// [`transition_sup`], which falls off like `1/√(ω²+1)` up to a constant.
pub fn screening_decay_violation(sc: &ScreeningSet) -> f64 {
    let v = &sc.rpa.vsqrt;
    let r = v * RMat::from_diagonal(&RVec::from_column_slice(&sc.rpa.mf.rho0)) * v;
    let rn = linalg::op_norm(&linalg::to_complex(&r));
    let rc = linalg::to_complex(&r);
    decay_nodes(sc)
        .iter()
        .flat_map(|&j| {
            let bound = rc.scale(2.0 * transition_sup(sc.grid.nodes[j], sc.rpa.mf.gap));
            [&sc.p0.values[j], &sc.chi0.values[j]].map(|x| {
                let upper = linalg::herm_eigvals(&linalg::hermitian_part(&(&bound + x)))[0];
                let lower = -linalg::herm_eigvals(&linalg::hermitian_part(x)).last().copied().unwrap_or(0.0);
                (-upper).max(-lower).max(0.0) / rn
            })
        })
        .fold(0.0, f64::max)
}

/// `‖W⁰_c(i·10·gap)‖ / ‖W⁰_c(0)‖`, both evaluated in closed form.
pub fn w0c_decay_ratio(rpa: &RpaModel) -> Result<f64> {
    let at = |w: f64| rpa.w0c(Complex64::new(0.0, w)).map(|m| linalg::op_norm(&m));
    Ok(at(10.0 * rpa.mf.gap)? / at(0.0)?)
}

pub fn screening(sc: &ScreeningSet) -> Vec<CheckResult> {
    let s = "screening";
    vec![
        CheckResult::below(s, "sandwich", sc.sandwich_violation(), 1e-10),
        CheckResult::below(s, "evenness", sc.evenness_residual(), 1e-12),
        CheckResult::below(s, "decay-bound", screening_decay_violation(sc), 1e-10)
            .with_detail(format!("nodes {:?}", decay_nodes(sc).map(|j| sc.grid.nodes[j]))),
        guard(s, "w0c-decay", w0c_decay_ratio(&sc.rpa).map(|v| CheckResult::below(s, "w0c-decay", v, 0.2))),
    ]
}

/// Quadrature errors of P⁰ against the closed form at `{0, gap, 10·gap}`.
pub fn convolution_errors(rpa: &RpaModel, k: usize, scale: f64) -> Result<Vec<f64>> {
    let g = make_grid(k, scale)?;
    let gap = rpa.mf.gap;
    [0.0, gap, 10.0 * gap]
        .iter()
        .map(|&w| Ok(linalg::max_abs_diff(&p0_convolution(rpa, &g, w)?, &p0_explicit(rpa, w))))
        .collect()
}

pub fn convolution(rpa: &RpaModel, scale: f64) -> Vec<CheckResult> {
    let s = "convolution";
    let run = || -> Result<Vec<CheckResult>> {
        let fine = convolution_errors(rpa, 256, scale)?;
        let coarse = convolution_errors(rpa, 128, scale)?;
        let e256 = fine.iter().copied().fold(0.0, f64::max);
        let e128 = coarse.iter().copied().fold(0.0, f64::max);
        let g = make_grid(256, scale)?;
        let hh = p0_convolution_shifted(rpa, &g, rpa.mf.gap, 0.0, P0Parts::HoleHole)?;
        Ok(vec![
            CheckResult::below(s, "p0-closed-form", e256, 1e-6).with_detail(format!("K=256 errors {fine:?}")),
            CheckResult::judged(s, "refinement", e256, e128, refinement_ok(e128, e256))
                .with_detail(format!("K=128 {e128:.3e}, K=256 {e256:.3e}")),
            CheckResult::below(s, "hole-hole", linalg::max_abs(&hh), 1e-6),
        ])
    };
    run().unwrap_or_else(|e| vec![CheckResult::failed(s, "p0-closed-form", &e)])
}

/// Roundoff level below which refinement comparisons carry no information.
pub const REFINEMENT_FLOOR: f64 = 1e-12;

/// Doubling `K` must at least halve the error, unless both are at roundoff.
pub fn refinement_ok(coarse: f64, fine: f64) -> bool {
    fine <= 0.5 * coarse || coarse.max(fine) <= REFINEMENT_FLOOR
}

/// Change of `Σ̃_c(μ₀)` under `K → 2K` for the G₀W⁰ self-energy.
pub fn sigma_refinement(model: &LatticeModel, rpa: &RpaModel, k: usize, scale: f64) -> Result<f64> {
    let at = |k: usize| -> Result<CMat> {
        let grid = Arc::new(make_grid(k, scale)?);
        let sc = crate::screening::build_screening(rpa, grid.clone())?;
        let g0 = crate::solver::g0_iterate(&rpa.mf, grid)?;
        let _ = model;
        Ok(sigma_c_at(&g0, &sc, 0.0))
    };
    Ok(linalg::max_abs_diff(&at(k)?, &at(2 * k)?))
}

/// Smallest grid on which the shifted-contour comparison is made.
pub const CONTOUR_K: usize = 256;

pub fn g0w0(model: &LatticeModel, p: &GwProblem) -> Vec<CheckResult> {
    let s = "g0w0";
    let mf = p.mf();
    let mut out = Vec::new();
    let same = p.sigma00.kx == exchange_kernel(&mf.gamma0, &model.coulomb);
    out.push(CheckResult::judged(s, "exchange-bit-exact", if same { 0.0 } else { 1.0 }, 0.0, same));
    out.push(CheckResult::above(
        s,
        "exchange-negative",
        -linalg::sym_eigvals(&p.kx).last().copied().unwrap_or(0.0),
        -1e-10,
    ));
    out.push(CheckResult::below(
        s,
        "sigma-conjugation",
        p.sigma00.conjugation_defect.max(p.sigma00.sigma_c.conjugation_residual()),
        1e-10,
    ));
    out.push(guard(s, "one-shot-conjugation", {
        p.one_shot()
            .map(|(_, g)| CheckResult::below(s, "one-shot-conjugation", g.track.conjugation_residual(), 1e-10))
    }));
    out.push(guard(s, "sigma-refinement", {
        sigma_refinement(model, &p.screening.rpa, p.grid().len(), p.grid().scale)
            .map(|v| CheckResult::below(s, "sigma-refinement", v, 1e-5))
    }));
    out.push(guard(s, "contour-shift", {
        let k = p.grid().len().max(CONTOUR_K);
        make_grid(k, p.grid().scale)
            .and_then(|g| crate::screening::build_screening(&p.screening.rpa, Arc::new(g)))
            .and_then(|sc| contour_shift_check(&sc, &[0.0, mf.gap], 0.25 * mf.gap))
            .map(|v| CheckResult::below(s, "contour-shift", v, 1e-6).with_detail(format!("K={k}")))
    }));
    out
}

/// Tolerance of the contraction fit; loose tolerances leave too few residuals.
pub const CONTRACTION_TOL: f64 = 1e-13;

/// Contraction of Picard at `0.1·λ_*` and `0.05·λ_*`; the fitted ratios.
pub fn contraction_pair(p: &GwProblem, tol: f64) -> Result<(SolverReport, SolverReport)> {
    let mut cfg = SolverConfig::new(p.grid().clone(), 0.1 * p.bounds.lambda_star);
    cfg.tol = tol;
    let (_, _, a) = p.picard(&cfg)?;
    cfg.lambda *= 0.5;
    let (_, _, b) = p.picard(&cfg)?;
    Ok((a, b))
}

/// Distance between the fixed points reached from `G₀` and from a
/// perturbation of size `0.1·r`.
pub fn perturbed_restart(p: &GwProblem, lambda: f64, tol: f64, seed: u64) -> Result<f64> {
    let mut cfg = SolverConfig::new(p.grid().clone(), lambda);
    cfg.tol = tol;
    let (a, _, _) = p.picard(&cfg)?;
    let start = p.perturbed_start(0.1 * p.bounds.r, seed)?;
    let (b, _, _) = p.picard_from(&cfg, start)?;
    Ok(a.track.sub(&b.track).norm_l2())
}

pub fn solver(p: &GwProblem, reports: &[SolverReport], tol: f64, seed: u64) -> Vec<CheckResult> {
    let s = "solver";
    let mut out = Vec::new();
    for r in reports {
        let name = format!("fixed-point[λ={}]", r.lambda);
        let ok = r.converged && r.fixed_point_residual < tol;
        out.push(
            CheckResult::judged(s, &name, r.fixed_point_residual, tol, ok)
                .with_detail(format!("{} iterations, ratio {:?}", r.iterations, r.contraction)),
        );
    }
    out.push(guard(s, "lambda-zero", {
        p.picard(&SolverConfig::new(p.grid().clone(), 0.0)).map(|(_, _, r)| {
            let ok = r.converged && r.iterations == 1 && r.residuals == [0.0];
            CheckResult::judged(s, "lambda-zero", r.residuals.first().copied().unwrap_or(f64::NAN), 0.0, ok)
        })
    }));
    out.push(guard(s, "contraction-scaling", {
        contraction_pair(p, CONTRACTION_TOL).map(|(a, b)| match (a.contraction, b.contraction) {
            (Some(x), Some(y)) => CheckResult::judged(s, "contraction-scaling", y / x, 0.5, x < 1.0 && (y / x - 0.5).abs() <= 0.15)
                .with_detail(format!("ratio {x:.3e} at 0.1·λ_*, {y:.3e} at 0.05·λ_*")),
            _ => CheckResult::judged(s, "contraction-scaling", f64::NAN, 0.5, false).with_detail("too few residuals to fit"),
        })
    }));
    out.push(guard(s, "perturbed-restart", {
        perturbed_restart(p, 0.1 * p.bounds.lambda_star, tol, seed).map(|d| CheckResult::below(s, "perturbed-restart", d, 10.0 * tol))
    }));
    out.push(guard(s, "dyson-round-trip", {
        let lam = 0.1 * p.bounds.lambda_star;
        p.g_lambda(&p.sigma00, lam).and_then(|g| {
            let back = dyson_inverse_diagnostic(&g.track, p.mf())?;
            Ok(CheckResult::below(s, "dyson-round-trip", back.max_abs_diff(&p.sigma00.total().scale(lam)), 1e-8))
        })
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        assert!(CheckResult::below("a", "b", 1.0, 2.0).passed());
        assert!(!CheckResult::below("a", "b", f64::NAN, 2.0).passed());
        assert!(!CheckResult::above("a", "b", 1.0, 2.0).passed());
        assert_eq!(CheckResult::skipped("a", "b", "off").status, Status::Skipped);
    }

    #[test]
    fn refinement_rule() {
        assert!(refinement_ok(1e-4, 1e-9));
        assert!(!refinement_ok(1e-6, 9e-7));
        assert!(refinement_ok(3e-16, 5e-16));
    }

    #[test]
    fn kernel_and_hilbert_suites_pass() {
        assert!(kernel(1).iter().all(CheckResult::passed));
        let h = hilbert();
        assert!(h.iter().all(CheckResult::passed), "{h:?}");
    }
}
