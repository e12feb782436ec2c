//! Imaginary-axis quadrature, matrix-valued frequency tracks, Laplace
//! evaluation from spectral data and the discrete Hilbert transform.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{GwError, Result};
use crate::linalg::CMat;

/// Symmetric quadrature on the imaginary axis from Gauss–Legendre nodes
/// `x_j ∈ (−1, 1)` mapped by `ω = L·x/(1−x²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scale: f64,
    x: Vec<f64>,
    bary: Vec<f64>,
}

pub fn make_grid(k: usize, scale: f64) -> Result<FreqGrid> {
    if k < 8 || !k.is_multiple_of(2) {
        return Err(GwError::Input(format!("grid size must be even and >= 8, got {k}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GwError::Input(format!("grid scale must be positive, got {scale}")));
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(k).unwrap());
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = (0..k).map(|j| 0.5 * (pairs[j].0 - pairs[k - 1 - j].0)).collect();
    let lw: Vec<f64> = (0..k).map(|j| 0.5 * (pairs[j].1 + pairs[k - 1 - j].1)).collect();
    let nodes = x.iter().map(|&x| scale * x / (1.0 - x * x)).collect();
    let weights = x
        .iter()
        .zip(&lw)
        .map(|(&x, &w)| w * scale * (1.0 + x * x) / ((1.0 - x * x) * (1.0 - x * x)))
        .collect();
    let bary = x
        .iter()
        .zip(&lw)
        .enumerate()
        .map(|(j, (&x, &w))| {
            let s = ((1.0 - x * x) * w).sqrt();
            if j % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect();
    Ok(FreqGrid {
        nodes,
        weights,
        scale,
        x,
        bary,
    })
}

impl FreqGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn omega_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// `|Σ_j w_j/(ω_j²+1) − π|`.
    pub fn calibration_error(&self) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(w, q)| q / (w * w + 1.0))
            .sum();
        (s - PI).abs()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&w, q)| q * f(w)).sum()
    }

    /// Index of the node at `−ω_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.len() - 1 - j
    }

    fn to_x(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        2.0 * omega / (self.scale + (self.scale * self.scale + 4.0 * omega * omega).sqrt())
    }

    /// Interpolation coefficients `c_j` with `f(ω) ≈ Σ_j c_j f(ω_j)`.
    ///
    /// Barycentric Lagrange interpolation in the mapped variable `x` between
    /// the outermost nodes, nearest node beyond them.
    pub fn interp_coeffs(&self, omega: f64) -> Vec<f64> {
        let k = self.len();
        let mut c = vec![0.0; k];
        if omega <= self.nodes[0] {
            c[0] = 1.0;
            return c;
        }
        if omega >= self.nodes[k - 1] {
            c[k - 1] = 1.0;
            return c;
        }
        let x = self.to_x(omega);
        for j in 0..k {
            let d = x - self.x[j];
            if d == 0.0 {
                c[j] = 1.0;
                return c;
            }
            c[j] = self.bary[j] / d;
        }
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|v| *v /= s);
        c
    }
}

/// Samples `F(ν + iω_j)` of a matrix-valued function on a grid.
#[derive(Clone, Debug)]
pub struct MatrixTrack {
    pub grid: Arc<FreqGrid>,
    pub values: Vec<CMat>,
    pub axis_offset: f64,
}

impl MatrixTrack {
    pub fn new(grid: Arc<FreqGrid>, values: Vec<CMat>, axis_offset: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GwError::Shape(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        let m = values.first().map_or(0, |v| v.nrows());
        if values.iter().any(|v| v.nrows() != m || v.ncols() != m) {
            return Err(GwError::Shape("non-uniform matrix dimensions in track".into()));
        }
        if values.iter().any(|v| v.iter().any(|z| !z.is_finite())) {
            return Err(GwError::NonFinite("track".into()));
        }
        Ok(MatrixTrack {
            grid,
            values,
            axis_offset,
        })
    }

    /// Tabulate `f(ω_j)` in parallel.
    pub fn from_fn(grid: Arc<FreqGrid>, axis_offset: f64, f: impl Fn(f64) -> CMat + Sync) -> Result<Self> {
        let values = grid.nodes.par_iter().map(|&w| f(w)).collect();
        Self::new(grid, values, axis_offset)
    }

    pub fn try_from_fn(
        grid: Arc<FreqGrid>,
        axis_offset: f64,
        f: impl Fn(f64) -> Result<CMat> + Sync,
    ) -> Result<Self> {
        let values = grid.nodes.par_iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values, axis_offset)
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zeros_like(&self) -> MatrixTrack {
        let m = self.dim();
        MatrixTrack {
            grid: self.grid.clone(),
            values: vec![CMat::zeros(m, m); self.len()],
            axis_offset: self.axis_offset,
        }
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat + Sync + Send) -> MatrixTrack {
        MatrixTrack {
            grid: self.grid.clone(),
            values: self.values.par_iter().map(f).collect(),
            axis_offset: self.axis_offset,
        }
    }

    pub fn zip_map(&self, other: &MatrixTrack, f: impl Fn(&CMat, &CMat) -> CMat + Sync) -> MatrixTrack {
        MatrixTrack {
            grid: self.grid.clone(),
            values: self.values.par_iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
            axis_offset: self.axis_offset,
        }
    }

    pub fn scale(&self, s: f64) -> MatrixTrack {
        self.map(|a| a.scale(s))
    }

    pub fn sub(&self, other: &MatrixTrack) -> MatrixTrack {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &MatrixTrack) -> MatrixTrack {
        self.zip_map(other, |a, b| a + b)
    }

    /// Grid-weighted L² norm `(Σ_j w_j ‖F_j‖_F²)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.weights)
            .map(|(v, w)| w * crate::linalg::frob2(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest spectral norm over the nodes.
    pub fn norm_sup(&self) -> f64 {
        self.values
            .par_iter()
            .map(crate::linalg::op_norm)
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &MatrixTrack) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| crate::linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }

    /// `max_j ‖F(−ω_j) − F(ω_j)*‖_max`.
    pub fn conjugation_residual(&self) -> f64 {
        (0..self.len())
            .map(|j| crate::linalg::max_abs_diff(&self.values[self.grid.mirror(j)], &self.values[j].adjoint()))
            .fold(0.0, f64::max)
    }

    /// `max_j ‖F(−ω_j) − F(ω_j)‖_max`.
    pub fn evenness_residual(&self) -> f64 {
        (0..self.len())
            .map(|j| crate::linalg::max_abs_diff(&self.values[self.grid.mirror(j)], &self.values[j]))
            .fold(0.0, f64::max)
    }

    /// Interpolated value at an arbitrary imaginary part (see [`FreqGrid::interp_coeffs`]).
    pub fn interpolate(&self, omega: f64) -> CMat {
        let c = self.grid.interp_coeffs(omega);
        let m = self.dim();
        let mut out = CMat::zeros(m, m);
        for (cj, v) in c.iter().zip(&self.values) {
            if *cj != 0.0 {
                out.zip_apply(v, |o, x| *o += x * *cj);
            }
        }
        out
    }

    pub fn check_same_grid(&self, other: &MatrixTrack) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(GwError::GridMismatch(format!(
                "K={} L={} vs K={} L={}",
                self.grid.len(),
                self.grid.scale,
                other.grid.len(),
                other.grid.scale
            )))
        }
    }
}

/// `(1/2π) Σ_l w_l · combiner(A(ω_j+ω_l), B(ω_l))` at every node `ω_j`.
///
/// `a_eval(ω)` must return `A(ν_A + iω)` in closed form. The output samples
/// the axis `ν_A − ν_B + iω`.
pub fn convolve_tracks<F, C>(a: &MatrixTrack, a_eval: &F, b: &MatrixTrack, combiner: C) -> Result<MatrixTrack>
where
    F: Fn(f64) -> CMat + Sync,
    C: Fn(&CMat, &CMat) -> CMat + Sync,
{
    a.check_same_grid(b)?;
    let grid = a.grid.clone();
    let values = grid
        .nodes
        .par_iter()
        .map(|&w| convolve_at(&grid, w, a_eval, &b.values, &combiner))
        .collect();
    MatrixTrack::new(grid, values, a.axis_offset - b.axis_offset)
}

/// The convolution of [`convolve_tracks`] at a single, arbitrary `ω`.
pub fn convolve_at<F, C>(grid: &FreqGrid, omega: f64, a_eval: &F, b: &[CMat], combiner: &C) -> CMat
where
    F: Fn(f64) -> CMat,
    C: Fn(&CMat, &CMat) -> CMat,
{
    let m = b[0].nrows();
    let mut acc = CMat::zeros(m, m);
    for ((&wl, &ql), bl) in grid.nodes.iter().zip(&grid.weights).zip(b) {
        let c = combiner(&a_eval(omega + wl), bl);
        acc.zip_apply(&c, |s, x| *s += x * ql);
    }
    acc.unscale(2.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Causal,
    AntiCausal,
}

/// `F(z) = Σ_n R_n/(z − λ_n)`.
#[derive(Clone, Debug)]
pub struct SpectralRep {
    pub poles: Vec<f64>,
    pub weight_mats: Vec<CMat>,
    pub side: Side,
}

pub const POLE_TOL: f64 = 1e-12;

pub fn laplace_eval(rep: &SpectralRep, z: Complex64) -> Result<CMat> {
    let m = rep.weight_mats.first().map_or(0, |r| r.nrows());
    let mut out = CMat::zeros(m, m);
    for (&p, r) in rep.poles.iter().zip(&rep.weight_mats) {
        let d = z - p;
        if d.norm() < POLE_TOL {
            return Err(GwError::PoleProximity {
                z: format!("{z}"),
                dist: d.norm(),
            });
        }
        let s = 1.0 / d;
        out.zip_apply(r, |o, x| *o += x * s);
    }
    Ok(out)
}

impl SpectralRep {
    pub fn total_weight(&self) -> CMat {
        let m = self.weight_mats.first().map_or(0, |r| r.nrows());
        self.weight_mats.iter().fold(CMat::zeros(m, m), |a, r| a + r)
    }
}

fn check_uniform(omega: &[f64]) -> Result<f64> {
    if omega.len() < 2 {
        return Err(GwError::Input("need at least two samples".into()));
    }
    let dt = (omega[omega.len() - 1] - omega[0]) / (omega.len() - 1) as f64;
    let tol = 1e-9 * dt.abs().max(f64::MIN_POSITIVE);
    if !(dt > 0.0) || omega.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol.max(1e-12 * w[1].abs())) {
        return Err(GwError::Input("Hilbert transform requires a uniform increasing grid".into()));
    }
    Ok(dt)
}

/// Hilbert transform of periodic samples: multiplication by `−i·sgn(k)` in the
/// Fourier domain. The length must be a power of two.
pub fn hilbert_transform_periodic(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = samples.len();
    if !n.is_power_of_two() {
        return Err(GwError::Input(format!("length {n} is not a power of two")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let s = if k == 0 || 2 * k == n {
            0.0
        } else if 2 * k < n {
            1.0
        } else {
            -1.0
        };
        *v *= Complex64::new(0.0, -s);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}

pub const HILBERT_PAD: usize = 8;

/// Hilbert transform of samples on a uniform window, zero-padded to
/// `HILBERT_PAD` times the next power of two to suppress periodic images.
pub fn hilbert_transform(omega: &[f64], samples: &[Complex64]) -> Result<Vec<Complex64>> {
    if omega.len() != samples.len() {
        return Err(GwError::Shape("grid and samples differ in length".into()));
    }
    check_uniform(omega)?;
    let n = samples.len();
    let len = n.next_power_of_two() * HILBERT_PAD;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..n].copy_from_slice(samples);
    let out = hilbert_transform_periodic(&buf)?;
    Ok(out[..n].to_vec())
}

/// `max |Re f + ℌ(Im f)|` over the window; small for boundary values of
/// functions analytic in the upper half-plane.
pub fn plemelj_residual(omega: &[f64], samples: &[Complex64]) -> Result<f64> {
    let im: Vec<Complex64> = samples.iter().map(|z| Complex64::new(z.im, 0.0)).collect();
    let h = hilbert_transform(omega, &im)?;
    Ok(samples.iter().zip(&h).map(|(f, hf)| (f.re + hf.re).abs()).fold(0.0, f64::max))
}

/// `n` uniform points on `[a, b]`.
pub fn uniform_window(a: f64, b: f64, n: usize) -> Vec<f64> {
    let dt = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + i as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn grid_calibration_and_symmetry() {
        let g = make_grid(64, 1.0).unwrap();
        assert!(g.calibration_error() < 1e-8, "{}", g.calibration_error());
        for j in 0..64 {
            assert!((g.nodes[j] + g.nodes[63 - j]).abs() < 1e-12);
        }
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let odd = g.integrate(|w| w / ((w * w + 1.0) * (w * w + 1.0)));
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(make_grid(6, 1.0).is_err());
        assert!(make_grid(9, 1.0).is_err());
        assert!(make_grid(8, 0.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_functions() {
        let g = make_grid(64, 1.0).unwrap();
        let c = g.interp_coeffs(g.nodes[10]);
        assert_eq!(c[10], 1.0);
        let f = |w: f64| 1.0 / (w * w + 4.0);
        let vals: Vec<f64> = g.nodes.iter().map(|&w| f(w)).collect();
        for &w in &[0.0, 0.37, -2.5, 11.0] {
            let approx: f64 = g.interp_coeffs(w).iter().zip(&vals).map(|(c, v)| c * v).sum();
            assert!((approx - f(w)).abs() < 1e-9, "{w}: {approx} vs {}", f(w));
        }
        let beyond = g.interp_coeffs(10.0 * g.omega_max());
        assert_eq!(beyond[63], 1.0);
    }

    #[test]
    fn single_pole_laplace() {
        let rep = SpectralRep {
            poles: vec![1.0],
            weight_mats: vec![CMat::identity(2, 2)],
            side: Side::Causal,
        };
        let v = laplace_eval(&rep, Complex64::new(0.0, 1.0)).unwrap();
        assert!((v[(0, 0)] - Complex64::new(-0.5, -0.5)).norm() < 1e-15);
        assert!((v[(0, 0)] * Complex64::new(-1.0, 1.0) - 1.0).norm() < 1e-15);
        assert!(v[(0, 1)].norm() == 0.0);
        assert!(laplace_eval(&rep, c(1.0)).is_err());
    }

    #[test]
    fn lorentzian_convolution() {
        let g = Arc::new(make_grid(256, 1.0).unwrap());
        let f = |w: f64| CMat::from_element(1, 1, c(1.0 / (w * w + 1.0)));
        let b = MatrixTrack::from_fn(g.clone(), 0.0, f).unwrap();
        let a = b.clone();
        let out = convolve_at(&g, 0.0, &f, &b.values, &|x: &CMat, y: &CMat| x.component_mul(y));
        assert!((out[(0, 0)].re - 0.25).abs() < 1e-6, "{}", out[(0, 0)].re);
        let full = convolve_tracks(&a, &f, &b, |x, y| x.component_mul(y)).unwrap();
        assert!(full.evenness_residual() < 1e-10);
        assert_eq!(full.axis_offset, 0.0);
    }

    #[test]
    fn convolution_rejects_grid_mismatch() {
        let g1 = Arc::new(make_grid(16, 1.0).unwrap());
        let g2 = Arc::new(make_grid(16, 2.0).unwrap());
        let f = |_: f64| CMat::zeros(1, 1);
        let a = MatrixTrack::from_fn(g1, 0.0, f).unwrap();
        let b = MatrixTrack::from_fn(g2, 0.0, f).unwrap();
        assert!(convolve_tracks(&a, &f, &b, |x, y| x.component_mul(y)).is_err());
    }

    #[test]
    fn lorentzian_hilbert_pair() {
        let w = uniform_window(-200.0, 200.0, 1 << 14);
        let f: Vec<Complex64> = w.iter().map(|&x| c(1.0 / (x * x + 1.0))).collect();
        let h = hilbert_transform(&w, &f).unwrap();
        let err = w
            .iter()
            .zip(&h)
            .filter(|(x, _)| x.abs() <= 10.0)
            .map(|(&x, v)| (v - c(x / (x * x + 1.0))).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        let zero = hilbert_transform(&w, &vec![c(0.0); w.len()]).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn hilbert_rejects_nonuniform() {
        let w = vec![0.0, 1.0, 3.0, 4.0];
        assert!(hilbert_transform(&w, &[c(1.0); 4]).is_err());
    }

    #[test]
    fn plemelj_discriminates_causality() {
        let eta = 0.5;
        let w = uniform_window(-200.0 * eta, 200.0 * eta, 1 << 14);
        let causal: Vec<Complex64> = w.iter().map(|&x| 1.0 / Complex64::new(x, eta)).collect();
        let anti: Vec<Complex64> = w.iter().map(|&x| 1.0 / Complex64::new(x, -eta)).collect();
        let r1 = plemelj_residual(&w, &causal).unwrap();
        let r2 = plemelj_residual(&w, &anti).unwrap();
        assert!(r1 < 1e-2, "{r1}");
        assert!((r2 - 2.0).abs() < 0.05, "{r2}");
        assert_eq!(plemelj_residual(&w, &vec![c(0.0); w.len()]).unwrap(), 0.0);
    }
}
