//! Fock exchange and the correlation self-energy `Σ_c = −(1/2π) ∫ G ⊙ W⁰_c`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GwError, Result};
use crate::freq::{convolve_at, FreqGrid, MatrixTrack};
use crate::kernel::odot_op;
use crate::linalg::{self, CMat, RMat};
use crate::screening::ScreeningSet;

pub const CONJ_TOL: f64 = 1e-10;

/// A Green's function sampled on `μ₀ + iω_j` that can also be evaluated
/// anywhere on the same vertical line.
pub trait GreenEval: Sync {
    fn track(&self) -> &MatrixTrack;
    /// `G(axis_offset + iω)`.
    fn eval(&self, omega: f64) -> CMat;
}

/// `(K_x)_{ij} = −γ_{ij} V_{ij}`.
pub fn exchange_kernel(gamma0: &RMat, coulomb: &RMat) -> RMat {
    -gamma0.component_mul(coulomb)
}

#[derive(Clone, Debug)]
pub struct SelfEnergySet {
    pub kx: RMat,
    pub sigma_c: MatrixTrack,
    /// Conjugation residual of `Σ_c` before it was symmetrized.
    pub conjugation_defect: f64,
}

impl SelfEnergySet {
    pub fn zero(kx: RMat, like: &MatrixTrack) -> Self {
        SelfEnergySet {
            kx,
            sigma_c: like.zeros_like(),
            conjugation_defect: 0.0,
        }
    }

    /// `K_x + Σ_c(ω_j)` at node `j`.
    pub fn total_at(&self, j: usize) -> CMat {
        &self.sigma_c.values[j] + linalg::to_complex(&self.kx)
    }

    /// `K_x + Σ_c(ω)` with `Σ_c` interpolated between nodes.
    pub fn eval(&self, omega: f64) -> CMat {
        self.sigma_c.interpolate(omega) + linalg::to_complex(&self.kx)
    }

    pub fn total(&self) -> MatrixTrack {
        let kx = linalg::to_complex(&self.kx);
        self.sigma_c.map(|s| s + &kx)
    }
}

/// `Σ̃_c(μ₀+iω_j) = −(1/2π) Σ_l w_l G̃(μ₀+i(ω_j+ω_l)) ⊙ W̃⁰_c(iω_l)`.
///
/// The result is made exactly conjugation symmetric; the defect found before
/// that is returned alongside and must not exceed [`CONJ_TOL`] relative to
/// the track's size.
pub fn sigma_c<G: GreenEval + ?Sized>(g: &G, w: &ScreeningSet) -> Result<(MatrixTrack, f64)> {
    g.track().check_same_grid(&w.w0c)?;
    let grid = w.grid.clone();
    let wgt = w.rpa.weight;
    let values: Vec<CMat> = grid
        .nodes
        .par_iter()
        .map(|&om| -convolve_at(&grid, om, &|x| g.eval(x), &w.w0c.values, &|a: &CMat, b: &CMat| odot_op(a, b, wgt)))
        .collect();
    let raw = MatrixTrack::new(grid.clone(), values, g.track().axis_offset)?;
    let defect = raw.conjugation_residual();
    let size = raw.values.iter().map(linalg::max_abs).fold(1.0, f64::max);
    if defect > CONJ_TOL * size {
        return Err(GwError::Solver(format!("Σ_c conjugation defect {defect:e}")));
    }
    Ok((symmetrize_conjugation(&raw), defect))
}

/// `Σ̃_c(μ₀+iω)` at an arbitrary `ω`, by the same quadrature as [`sigma_c`].
pub fn sigma_c_at<G: GreenEval + ?Sized>(g: &G, w: &ScreeningSet, omega: f64) -> CMat {
    let wgt = w.rpa.weight;
    -convolve_at(&w.grid, omega, &|x| g.eval(x), &w.w0c.values, &|a: &CMat, b: &CMat| odot_op(a, b, wgt))
}

/// `F(−ω_j) ← ½(F(−ω_j) + F(ω_j)*)` and the mirror image.
pub fn symmetrize_conjugation(t: &MatrixTrack) -> MatrixTrack {
    let mut out = t.clone();
    for j in 0..t.len() {
        let k = t.grid.mirror(j);
        out.values[j] = (&t.values[j] + t.values[k].adjoint()).scale(0.5);
    }
    out
}

/// `𝔰[G] = K_x + Σ_c[G]`.
pub fn s_map<G: GreenEval + ?Sized>(g: &G, w: &ScreeningSet, kx: &RMat) -> Result<SelfEnergySet> {
    let (sigma_c, conjugation_defect) = sigma_c(g, w)?;
    Ok(SelfEnergySet {
        kx: kx.clone(),
        sigma_c,
        conjugation_defect,
    })
}

/// `Σ_c(μ₀+iω)` for `G₀` with the integration contour moved to `ν′ + iℝ`,
/// `W⁰_c` evaluated in closed form off the imaginary axis.
pub fn sigma_c_g0_shifted(w: &ScreeningSet, omega: f64, nu_shift: f64) -> Result<CMat> {
    let rpa = &w.rpa;
    let mu = rpa.mf.mu0;
    let m = rpa.m();
    let grid = &w.grid;
    let terms = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(&wl, &ql)| {
            let wc = rpa.w0c(Complex64::new(nu_shift, wl))?;
            let g = rpa.g0(Complex64::new(mu + nu_shift, omega + wl));
            Ok(odot_op(&g, &wc, rpa.weight).scale(ql))
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = terms.into_iter().fold(CMat::zeros(m, m), |a, b| a + b);
    Ok(-acc.unscale(2.0 * std::f64::consts::PI))
}

/// Largest difference between the contour on `iℝ` and on `ν′ + iℝ`.
pub fn contour_shift_check(w: &ScreeningSet, omegas: &[f64], nu_shift: f64) -> Result<f64> {
    omegas.iter().try_fold(0.0f64, |acc, &om| {
        let a = sigma_c_g0_shifted(w, om, 0.0)?;
        let b = sigma_c_g0_shifted(w, om, nu_shift)?;
        Ok(acc.max(linalg::max_abs_diff(&a, &b)))
    })
}

/// Sum of simple poles `Σ_r R_r/(iω − a_r)` with real symmetric residues:
/// a conjugation-symmetric probe direction for `𝔰`.
#[derive(Clone, Debug)]
pub struct RationalProbe {
    pub track: MatrixTrack,
    poles: Vec<(f64, CMat)>,
}

impl RationalProbe {
    pub fn random(grid: std::sync::Arc<FreqGrid>, m: usize, gap: f64, rng: &mut impl Rng) -> Result<Self> {
        let poles: Vec<(f64, CMat)> = (0..3)
            .map(|_| {
                let a = rng.random_range(0.5 * gap..2.0 * gap) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let r = RMat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
                (a, linalg::to_complex(&((&r + r.transpose()) * 0.5)))
            })
            .collect();
        let eval = |w: f64| Self::sum(&poles, w, m);
        let track = MatrixTrack::from_fn(grid, 0.0, eval)?;
        Ok(RationalProbe { track, poles })
    }

    fn sum(poles: &[(f64, CMat)], omega: f64, m: usize) -> CMat {
        poles
            .iter()
            .fold(CMat::zeros(m, m), |acc, (a, r)| acc + r * (Complex64::new(-a, omega)).inv())
    }
}

impl GreenEval for RationalProbe {
    fn track(&self) -> &MatrixTrack {
        &self.track
    }

    fn eval(&self, omega: f64) -> CMat {
        Self::sum(&self.poles, omega, self.track.dim())
    }
}

/// Operator-norm estimates for the linear part of `𝔰` from `L²` into sup-norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SNorm {
    /// Largest `‖Σ_c[δG]‖_sup / ‖δG‖₂` over random rational probes.
    pub probed: f64,
    /// `(1/2πw)(Σ_l w_l ‖W_l‖²_max)^{1/2}` from Cauchy–Schwarz.
    pub bound: f64,
}

pub fn s_norm_estimate(w: &ScreeningSet, probes: usize, seed: u64) -> Result<SNorm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = w.rpa.m();
    let mut probed = 0.0f64;
    for _ in 0..probes {
        let p = RationalProbe::random(w.grid.clone(), m, w.rpa.mf.gap, &mut rng)?;
        let (s, _) = sigma_c(&p, w)?;
        probed = probed.max(s.norm_sup() / p.track.norm_l2());
    }
    let wsum: f64 = w
        .w0c
        .values
        .iter()
        .zip(&w.grid.weights)
        .map(|(v, q)| q * linalg::max_abs(v).powi(2))
        .sum();
    let bound = wsum.sqrt() / (2.0 * std::f64::consts::PI * w.rpa.weight);
    Ok(SNorm { probed, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::make_grid;
    use crate::model::{build_lattice, solve_mean_field, ModelConfig};
    use crate::screening::{build_screening, RpaModel};
    use std::sync::Arc;

    struct Closed<'a> {
        track: MatrixTrack,
        rpa: &'a RpaModel,
    }

    impl GreenEval for Closed<'_> {
        fn track(&self) -> &MatrixTrack {
            &self.track
        }
        fn eval(&self, omega: f64) -> CMat {
            self.rpa.g0(Complex64::new(self.rpa.mf.mu0, omega))
        }
    }

    fn setup(k: usize) -> (crate::model::LatticeModel, ScreeningSet) {
        let model = build_lattice(&ModelConfig::chain(8, 2)).unwrap();
        let mf = solve_mean_field(&model, 2).unwrap();
        let rpa = RpaModel::new(&model, &mf);
        let grid = Arc::new(make_grid(k, mf.gap).unwrap());
        let s = build_screening(&rpa, grid).unwrap();
        (model, s)
    }

    fn g0<'a>(s: &'a ScreeningSet) -> Closed<'a> {
        let rpa = &s.rpa;
        let track = MatrixTrack::from_fn(s.grid.clone(), rpa.mf.mu0, |w| rpa.g0(Complex64::new(rpa.mf.mu0, w))).unwrap();
        Closed { track, rpa }
    }

    #[test]
    fn exchange_examples() {
        let z = exchange_kernel(&RMat::zeros(3, 3), &RMat::identity(3, 3));
        assert_eq!(z, RMat::zeros(3, 3));
        let g = RMat::from_element(2, 2, 0.5);
        let v = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let k = exchange_kernel(&g, &v);
        assert_eq!(k, RMat::from_row_slice(2, 2, &[-0.5, -0.25, -0.25, -0.5]));
    }

    #[test]
    fn exchange_is_negative_on_reference() {
        let model = build_lattice(&ModelConfig::chain(8, 2)).unwrap();
        let mf = solve_mean_field(&model, 2).unwrap();
        let k = exchange_kernel(&mf.gamma0, &model.coulomb);
        assert!(linalg::max_abs_diff_r(&k, &k.transpose()) == 0.0);
        assert!(*linalg::sym_eigvals(&k).last().unwrap() <= 1e-10);
    }

    #[test]
    fn zero_screening_gives_zero() {
        let (_, mut s) = setup(32);
        s.w0c = s.w0c.zeros_like();
        let (sc, _) = sigma_c(&g0(&s), &s).unwrap();
        assert_eq!(sc.norm_sup(), 0.0);
    }

    #[test]
    fn g0w0_sigma_structure() {
        let (model, s) = setup(64);
        let kx = exchange_kernel(&s.rpa.mf.gamma0, &model.coulomb);
        let set = s_map(&g0(&s), &s, &kx).unwrap();
        assert!(set.conjugation_defect < 1e-10);
        assert!(set.sigma_c.conjugation_residual() < 1e-10);
        let norms: Vec<f64> = set.sigma_c.values.iter().map(linalg::op_norm).collect();
        let half = s.grid.len() / 2;
        for j in half + 1..s.grid.len() - 1 {
            assert!(norms[j + 1] <= norms[j] * (1.0 + 1e-12), "{j}");
        }
    }

    #[test]
    fn s_map_is_affine() {
        let (model, s) = setup(32);
        let kx = exchange_kernel(&s.rpa.mf.gamma0, &model.coulomb);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = RationalProbe::random(s.grid.clone(), 8, s.rpa.mf.gap, &mut rng).unwrap();
        let b = RationalProbe::random(s.grid.clone(), 8, s.rpa.mf.gap, &mut rng).unwrap();
        let mut poles = a.poles.clone();
        poles.extend(b.poles.iter().cloned());
        let ab = RationalProbe {
            track: a.track.add(&b.track),
            poles,
        };
        let sa = s_map(&a, &s, &kx).unwrap().total();
        let sb = s_map(&b, &s, &kx).unwrap().total();
        let sab = s_map(&ab, &s, &kx).unwrap().total();
        let zero = RationalProbe {
            track: a.track.zeros_like(),
            poles: vec![],
        };
        let s0 = s_map(&zero, &s, &kx).unwrap();
        let comb = sab.sub(&sa).sub(&sb).add(&s0.total());
        assert!(comb.norm_sup() < 1e-12, "{}", comb.norm_sup());
        assert_eq!(s0.sigma_c.norm_sup(), 0.0);
        assert_eq!(s0.kx, kx);
    }

    #[test]
    fn contour_shift_is_harmless() {
        let (_, s) = setup(128);
        let gap = s.rpa.mf.gap;
        let d = contour_shift_check(&s, &[0.0, gap], 0.25 * gap).unwrap();
        assert!(d < 1e-6, "{d}");
        let direct = sigma_c(&g0(&s), &s).unwrap().0;
        let j = s.grid.len() / 2;
        let closed = sigma_c_g0_shifted(&s, s.grid.nodes[j], 0.0).unwrap();
        assert!(linalg::max_abs_diff(&direct.values[j], &closed) < 1e-12);
    }

    #[test]
    fn s_norm_stable_under_refinement() {
        let (_, a) = setup(64);
        let (_, b) = setup(128);
        let na = s_norm_estimate(&a, 8, 1).unwrap();
        let nb = s_norm_estimate(&b, 8, 1).unwrap();
        assert!(na.probed.is_finite() && na.probed > 0.0);
        assert!((na.probed / nb.probed - 1.0).abs() < 0.1, "{na:?} {nb:?}");
        assert!((na.bound / nb.bound - 1.0).abs() < 0.1);
    }
}
