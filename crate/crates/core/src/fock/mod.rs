//! Exact many-body reference by diagonalization in fixed particle-number
//! sectors of the lattice Fock space.

mod basis;
mod hamiltonian;

pub use basis::{apply_annihilation, apply_creation, binomial, FockSector, DEFAULT_BASIS_CAP};
pub use hamiltonian::{build_sector_with, cocg_shifted, lanczos_lowest, SectorHamiltonian};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GwError, Result};
use crate::freq::{laplace_eval, FreqGrid, MatrixTrack, Side, SpectralRep};
use crate::linalg::{self, CMat, RMat, RVec};
use crate::model::{weak_form_matrix, GradientStencil, LatticeModel};
use crate::screening::SumRuleTable;

pub const DEGENERACY_TOL: f64 = 1e-9;
pub const DENSE_LIMIT: usize = 4000;
const LANCZOS_TOL: f64 = 1e-10;
const SOLVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub basis_cap: usize,
    pub dense_limit: usize,
    pub degeneracy_tol: f64,
    /// Include the Coulomb term in the sector Hamiltonians.
    pub interacting: bool,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            basis_cap: DEFAULT_BASIS_CAP,
            dense_limit: DENSE_LIMIT,
            degeneracy_tol: DEGENERACY_TOL,
            interacting: true,
            seed: 0,
        }
    }
}

/// Sector Hamiltonian of the lattice model: bare one-body part −½Δ + v_ext
/// plus the Coulomb kernel.
pub fn build_sector(model: &LatticeModel, n: usize) -> Result<SectorHamiltonian> {
    build_sector_with(&model.h0, Some(&model.coulomb), n, DEFAULT_BASIS_CAP)
}

#[derive(Clone, Debug)]
pub struct GroundStateData {
    pub n: usize,
    pub energy: f64,
    pub vector: Vec<f64>,
    pub degeneracy_gap: f64,
    /// One-body density matrix `γ_ij = ⟨a†_j a_i⟩`.
    pub gamma: RMat,
    /// Density per unit volume.
    pub rho: Vec<f64>,
    /// Pair density kernel `½⟨n_i n_j⟩/h^{2·dim}` for `i ≠ j`.
    pub rho2: RMat,
}

fn lowest_pair(h: &SectorHamiltonian, opts: &OracleOptions) -> Result<(f64, f64, Vec<f64>)> {
    if h.dim() == 0 {
        return Err(GwError::Input("empty sector".into()));
    }
    if h.dim() <= opts.dense_limit {
        let (vals, vecs) = linalg::sym_eig(&h.to_dense());
        let gap = if vals.len() > 1 { vals[1] - vals[0] } else { f64::INFINITY };
        Ok((vals[0], gap, vecs.column(0).iter().copied().collect()))
    } else {
        let (vals, v) = lanczos_lowest(h, LANCZOS_TOL, 600, opts.seed)?;
        let gap = if vals.len() > 1 { vals[1] - vals[0] } else { f64::INFINITY };
        Ok((vals[0], gap, v))
    }
}

pub fn ground_state(h: &SectorHamiltonian, weight: f64, opts: &OracleOptions) -> Result<GroundStateData> {
    let (energy, gap, mut vector) = lowest_pair(h, opts)?;
    if gap <= opts.degeneracy_tol {
        return Err(GwError::DegenerateGroundState {
            gap,
            tol: opts.degeneracy_tol,
        });
    }
    if let Some(&lead) = vector.iter().find(|v| v.abs() > 1e-8) {
        if lead < 0.0 {
            vector.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let s = &h.sector;
    let m = s.m_sites;
    let mut gamma = RMat::zeros(m, m);
    let mut pair = RMat::zeros(m, m);
    for (k, &word) in s.basis.iter().enumerate() {
        let c = vector[k];
        if c == 0.0 {
            continue;
        }
        for i in 0..m {
            if word >> i & 1 == 1 {
                gamma[(i, i)] += c * c;
                for j in 0..m {
                    if j != i && word >> j & 1 == 1 {
                        pair[(i, j)] += c * c;
                    }
                }
            }
        }
        for j in 0..m {
            let Some((s1, w1)) = basis::annihilate(word, j) else { continue };
            for i in 0..m {
                if i == j {
                    continue;
                }
                if let Some((s2, w2)) = basis::create(w1, i) {
                    let idx = s.index_of(w2).unwrap();
                    gamma[(i, j)] += s1 * s2 * vector[idx] * c;
                }
            }
        }
    }
    let gamma = (&gamma + gamma.transpose()) * 0.5;
    let rho = (0..m).map(|i| gamma[(i, i)] / weight).collect();
    let rho2 = pair * (0.5 / (weight * weight));
    Ok(GroundStateData {
        n: s.n_particles,
        energy,
        vector,
        degeneracy_gap: gap,
        gamma,
        rho,
        rho2,
    })
}

impl GroundStateData {
    /// Largest violation of `|γ_ij|² ≤ γ_ii γ_jj`.
    pub fn cauchy_schwarz_violation(&self) -> f64 {
        let m = self.gamma.nrows();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..m {
            for j in 0..m {
                let g = self.gamma[(i, j)];
                worst = worst.max(g * g - self.gamma[(i, i)] * self.gamma[(j, j)]);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitationWindow {
    pub e_minus: f64,
    pub e_plus: f64,
    pub mu: f64,
}

/// Columns `a†_i Ψ` and `a_i Ψ`.
#[derive(Clone, Debug)]
pub struct ApmMaps {
    pub a_plus_star: RMat,
    pub a_minus: RMat,
}

pub fn build_apm(ground: &GroundStateData, sector: &FockSector, up: Option<&FockSector>, down: Option<&FockSector>) -> ApmMaps {
    let m = sector.m_sites;
    let column_map = |target: Option<&FockSector>, creating: bool| -> RMat {
        let Some(t) = target else { return RMat::zeros(0, m) };
        let mut out = RMat::zeros(t.dim(), m);
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            let col = if creating {
                apply_creation(sector, t, &e, &ground.vector)
            } else {
                apply_annihilation(sector, t, &e, &ground.vector)
            };
            out.set_column(i, &linalg::RVec::from_vec(col));
        }
        out
    };
    ApmMaps {
        a_plus_star: column_map(up, true),
        a_minus: column_map(down, false),
    }
}

impl ApmMaps {
    /// `A₊A₊*`.
    pub fn particle_gram(&self) -> RMat {
        self.a_plus_star.transpose() * &self.a_plus_star
    }

    /// `A₋*A₋`.
    pub fn hole_gram(&self) -> RMat {
        self.a_minus.transpose() * &self.a_minus
    }
}

#[derive(Clone, Debug)]
struct DenseSpectrum {
    energies: Vec<f64>,
    vectors: RMat,
}

fn dense_spectrum(h: &SectorHamiltonian, opts: &OracleOptions) -> Option<DenseSpectrum> {
    (h.dim() <= opts.dense_limit).then(|| {
        let (energies, vectors) = linalg::sym_eig(&h.to_dense());
        DenseSpectrum { energies, vectors }
    })
}

/// Spectral measures of one bin.
#[derive(Clone, Debug)]
pub struct SpectralBin {
    pub lo: f64,
    pub hi: f64,
    pub particle: RMat,
    pub hole: RMat,
}

/// Exact reference for an `N`-particle ground state with its `N±1` sectors.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    pub weight: f64,
    pub one_body: RMat,
    pub coulomb: Option<RMat>,
    coulomb_op_sqrt: RMat,
    pub h_n: SectorHamiltonian,
    pub h_up: Option<SectorHamiltonian>,
    pub h_down: Option<SectorHamiltonian>,
    pub ground: GroundStateData,
    pub window: ExcitationWindow,
    pub maps: ApmMaps,
    spec_n: Option<DenseSpectrum>,
    /// Causal particle part and anti-causal hole part, when the sectors are small.
    pub particle_rep: Option<SpectralRep>,
    pub hole_rep: Option<SpectralRep>,
    /// `(n_s − ⟨n_s⟩)Ψ` as columns, projected onto `Ψ^⊥`.
    fluct: RMat,
}

fn spectral_rep(spec: &DenseSpectrum, map: &RMat, ref_energy: f64, particle: bool) -> SpectralRep {
    let proj = spec.vectors.transpose() * map;
    let mut poles = Vec::with_capacity(spec.energies.len());
    let mut weight_mats = Vec::with_capacity(spec.energies.len());
    for (n, &e) in spec.energies.iter().enumerate() {
        let row = proj.row(n);
        let r = row.transpose() * row;
        poles.push(if particle { e - ref_energy } else { ref_energy - e });
        weight_mats.push(linalg::to_complex(&r));
    }
    SpectralRep {
        poles,
        weight_mats,
        side: if particle { Side::Causal } else { Side::AntiCausal },
    }
}

impl ExactOracle {
    pub fn new(model: &LatticeModel, n: usize, opts: &OracleOptions) -> Result<Self> {
        let coulomb = opts.interacting.then(|| model.coulomb.clone());
        Self::from_parts(model.h0.clone(), coulomb, model.weight(), model.coulomb_op_sqrt(), n, opts)
    }

    pub fn from_parts(
        one_body: RMat,
        coulomb: Option<RMat>,
        weight: f64,
        coulomb_op_sqrt: RMat,
        n: usize,
        opts: &OracleOptions,
    ) -> Result<Self> {
        let m = one_body.nrows();
        if n == 0 || n > m {
            return Err(GwError::Input(format!("oracle needs 1 <= N <= M, got N={n}, M={m}")));
        }
        let build = |k: usize| build_sector_with(&one_body, coulomb.as_ref(), k, opts.basis_cap);
        let h_n = build(n)?;
        let h_up = if n < m { Some(build(n + 1)?) } else { None };
        let h_down = Some(build(n - 1)?);
        let ground = ground_state(&h_n, weight, opts)?;
        let e0 = ground.energy;
        let lowest = |h: &Option<SectorHamiltonian>| -> Result<Option<f64>> {
            match h {
                Some(h) => Ok(Some(lowest_pair(h, opts)?.0)),
                None => Ok(None),
            }
        };
        let e_up = lowest(&h_up)?;
        let e_down = lowest(&h_down)?.unwrap();
        let e_minus = e0 - e_down;
        let e_plus = e_up.map_or(f64::INFINITY, |e| e - e0);
        if !(e_minus < e_plus) {
            return Err(GwError::Window { e_minus, e_plus });
        }
        let mu = if e_plus.is_finite() { 0.5 * (e_minus + e_plus) } else { e_minus + 1.0 };
        let maps = build_apm(&ground, &h_n.sector, h_up.as_ref().map(|h| &h.sector), h_down.as_ref().map(|h| &h.sector));

        let spec_up = h_up.as_ref().and_then(|h| dense_spectrum(h, opts));
        let spec_down = h_down.as_ref().and_then(|h| dense_spectrum(h, opts));
        let particle_rep = match (&h_up, &spec_up) {
            (None, _) => Some(SpectralRep {
                poles: vec![],
                weight_mats: vec![],
                side: Side::Causal,
            }),
            (Some(_), Some(s)) => Some(spectral_rep(s, &maps.a_plus_star, e0, true)),
            _ => None,
        };
        let hole_rep = spec_down.as_ref().map(|s| spectral_rep(s, &maps.a_minus, e0, false));

        let mut fluct = RMat::zeros(h_n.dim(), m);
        for (k, &word) in h_n.sector.basis.iter().enumerate() {
            for s in 0..m {
                let occ = (word >> s & 1) as f64;
                fluct[(k, s)] = (occ - ground.gamma[(s, s)]) * ground.vector[k];
            }
        }
        let psi = linalg::RVec::from_column_slice(&ground.vector);
        let overlap = psi.transpose() * &fluct;
        fluct -= &psi * overlap;

        Ok(ExactOracle {
            weight,
            one_body,
            coulomb,
            coulomb_op_sqrt,
            spec_n: dense_spectrum(&h_n, opts),
            h_n,
            h_up,
            h_down,
            ground,
            window: ExcitationWindow { e_minus, e_plus, mu },
            maps,
            particle_rep,
            hole_rep,
            fluct,
        })
    }

    pub fn m(&self) -> usize {
        self.one_body.nrows()
    }

    pub fn energy(&self) -> f64 {
        self.ground.energy
    }

    pub fn energy_up(&self) -> Option<f64> {
        self.window.e_plus.is_finite().then_some(self.ground.energy + self.window.e_plus)
    }

    pub fn energy_down(&self) -> f64 {
        self.ground.energy - self.window.e_minus
    }

    fn iterative_part(&self, z: Complex64, particle: bool) -> Result<CMat> {
        let (h, map, sign) = if particle {
            (self.h_up.as_ref(), &self.maps.a_plus_star, 1.0)
        } else {
            (self.h_down.as_ref(), &self.maps.a_minus, -1.0)
        };
        let m = self.m();
        let Some(h) = h else { return Ok(CMat::zeros(m, m)) };
        let cols: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let b: Vec<f64> = map.column(j).iter().copied().collect();
                cocg_shifted(h, z, sign, self.ground.energy, &b, SOLVE_TOL * 1e-2, 20 * h.dim() + 100)
            })
            .collect::<Result<_>>()?;
        Ok(CMat::from_fn(m, m, |i, j| {
            map.column(i).iter().zip(&cols[j]).map(|(a, x)| x * *a).sum()
        }))
    }

    /// Particle part `A₊ (z − (H_{N+1} − E))⁻¹ A₊*`.
    pub fn green_particle(&self, z: Complex64) -> Result<CMat> {
        match &self.particle_rep {
            Some(rep) if rep.poles.is_empty() => Ok(CMat::zeros(self.m(), self.m())),
            Some(rep) => laplace_eval(rep, z),
            None => self.iterative_part(z, true),
        }
    }

    /// Hole part `A₋* (z − (E − H_{N−1}))⁻¹ A₋`.
    pub fn green_hole(&self, z: Complex64) -> Result<CMat> {
        match &self.hole_rep {
            Some(rep) => laplace_eval(rep, z),
            None => self.iterative_part(z, false),
        }
    }

    pub fn exact_green(&self, z: Complex64) -> Result<CMat> {
        Ok(self.green_particle(z)? + self.green_hole(z)?)
    }

    /// `ω ↦ G̃(μ + iω)` sampled on a grid.
    pub fn green_track(&self, grid: std::sync::Arc<FreqGrid>) -> Result<MatrixTrack> {
        let mu = self.window.mu;
        MatrixTrack::try_from_fn(grid, mu, |w| self.exact_green(Complex64::new(mu, w)))
    }

    pub fn spectral_measure(&self, bins: &[(f64, f64)]) -> Result<Vec<SpectralBin>> {
        let (Some(p), Some(h)) = (&self.particle_rep, &self.hole_rep) else {
            return Err(GwError::SectorTooLarge {
                dim: self.h_up.as_ref().map_or(0, |h| h.dim()).max(self.h_down.as_ref().map_or(0, |h| h.dim())),
                cap: DENSE_LIMIT,
            });
        };
        for (i, a) in bins.iter().enumerate() {
            if a.0 > a.1 {
                return Err(GwError::Input(format!("bin {i} has lo > hi")));
            }
            for b in &bins[i + 1..] {
                if a.0 < b.1 && b.0 < a.1 {
                    return Err(GwError::Input("bins overlap".into()));
                }
            }
        }
        let m = self.m();
        let sum = |rep: &SpectralRep, lo: f64, hi: f64| -> RMat {
            rep.poles
                .iter()
                .zip(&rep.weight_mats)
                .filter(|(&e, _)| e >= lo && e < hi)
                .fold(RMat::zeros(m, m), |acc, (_, r)| acc + linalg::real_part(r))
        };
        Ok(bins
            .iter()
            .map(|&(lo, hi)| SpectralBin {
                lo,
                hi,
                particle: sum(p, lo, hi),
                hole: sum(h, lo, hi),
            })
            .collect())
    }

    /// Galitskii–Migdal energy `½ tr(−A₋*(H_{N−1} − E)A₋ + h γ)`.
    pub fn galitskii_migdal(&self) -> Result<f64> {
        if self.ground.n < 2 {
            return Err(GwError::Input("Galitskii-Migdal needs N >= 2".into()));
        }
        let h = self.h_down.as_ref().unwrap();
        let e0 = self.ground.energy;
        let mut t = 0.0;
        for j in 0..self.m() {
            let q: Vec<f64> = self.maps.a_minus.column(j).iter().copied().collect();
            let hq = h.apply(&q);
            t += q.iter().zip(&hq).map(|(a, b)| a * (b - e0 * a)).sum::<f64>();
        }
        let hg = (&self.one_body * &self.ground.gamma).trace();
        Ok(0.5 * (-t + hg))
    }

    /// `tr(hγ) + Σ_ij V_ij ρ₂_ij h^{2·dim}`.
    pub fn energy_decomposition(&self) -> f64 {
        let one = (&self.one_body * &self.ground.gamma).trace();
        let two = self
            .coulomb
            .as_ref()
            .map_or(0.0, |v| v.component_mul(&self.ground.rho2).sum() * self.weight * self.weight);
        one + two
    }

    /// `(ω² tr Re G̃_h(μ+iω), tr A₋*(H_{N−1} + μ − E)A₋)`; the first tends to
    /// the second as `ω → ∞`.
    pub fn gm_limit_diagnostic(&self, omega: f64) -> Result<(f64, f64)> {
        let mu = self.window.mu;
        let g = self.green_hole(Complex64::new(mu, omega))?;
        let lhs = omega * omega * g.trace().re;
        let h = self.h_down.as_ref().unwrap();
        let e0 = self.ground.energy;
        let mut rhs = 0.0;
        for j in 0..self.m() {
            let q: Vec<f64> = self.maps.a_minus.column(j).iter().copied().collect();
            let hq = h.apply(&q);
            rhs += q.iter().zip(&hq).map(|(a, b)| a * (b + (mu - e0) * a)).sum::<f64>();
        }
        Ok((lhs, rhs))
    }

    /// Charge-fluctuation map on nodal potentials: column `s` is `(n_s − ⟨n_s⟩)Ψ`.
    pub fn fluctuation_nodal(&self) -> &RMat {
        &self.fluct
    }

    /// Charge-fluctuation map `B` in the orthonormal site basis.
    pub fn fluctuation_map(&self) -> RMat {
        &self.fluct / self.weight.sqrt()
    }

    /// `‖B*Ψ‖_max`, i.e. the overlap of every column of `B` with `Ψ`.
    pub fn fluctuation_overlap(&self) -> f64 {
        let psi = linalg::RVec::from_column_slice(&self.ground.vector);
        (psi.transpose() * &self.fluct).amax()
    }

    /// `⟨u| F(H_N − E) |v⟩` for columns of `a`, `F` applied on `Ψ^⊥`.
    fn neutral_form(&self, a: &RMat, mut f: impl FnMut(f64) -> Complex64) -> Result<CMat> {
        let spec = self.spec_n.as_ref().ok_or(GwError::SectorTooLarge {
            dim: self.h_n.dim(),
            cap: DENSE_LIMIT,
        })?;
        let proj = spec.vectors.transpose() * a;
        let e0 = self.ground.energy;
        let m = a.ncols();
        let mut out = CMat::zeros(m, m);
        for k in 1..spec.energies.len() {
            let c = f(spec.energies[k] - e0);
            let row = proj.row(k);
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] += c * (row[i] * row[j]);
                }
            }
        }
        Ok(out)
    }

    /// `χ̃_sym(z) = −(BV^{1/2})* · 2(H♯−E)/((H♯−E)² − z²) · BV^{1/2}`.
    pub fn chi_sym(&self, z: Complex64) -> Result<CMat> {
        let bv = self.fluctuation_map() * &self.coulomb_op_sqrt;
        if self.spec_n.is_some() {
            let mut err = None;
            let out = self.neutral_form(&bv, |x| {
                let d = x * x - z * z;
                if d.norm() < 1e-24 {
                    err = Some(x);
                }
                -2.0 * x / d
            })?;
            if let Some(x) = err {
                return Err(GwError::PoleProximity {
                    z: format!("{z}"),
                    dist: (z.norm() - x).abs(),
                });
            }
            return Ok(out);
        }
        let m = self.m();
        let e0 = self.ground.energy;
        let cols: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let b: Vec<f64> = bv.column(j).iter().copied().collect();
                let x1 = cocg_shifted(&self.h_n, z, 1.0, e0, &b, SOLVE_TOL * 1e-2, 20 * self.h_n.dim() + 100)?;
                let x2 = cocg_shifted(&self.h_n, -z, 1.0, e0, &b, SOLVE_TOL * 1e-2, 20 * self.h_n.dim() + 100)?;
                Ok(x1.iter().zip(&x2).map(|(a, b)| a + b).collect())
            })
            .collect::<Result<_>>()?;
        Ok(CMat::from_fn(m, m, |i, j| {
            bv.column(i).iter().zip(&cols[j]).map(|(a, x)| x * *a).sum()
        }))
    }

    /// `ω² · 2⟨Bf| (H♯−E)/((H♯−E)²+ω²) |Bg⟩` for nodal potentials `f, g`,
    /// i.e. `⟨f̄, −ω² χ̃(iω) g⟩`.
    pub fn johnson_pairing(&self, f: &[f64], g: &[f64], omega: f64) -> Result<f64> {
        let m = self.m();
        let fg = RMat::from_fn(m, 2, |i, c| if c == 0 { f[i] } else { g[i] });
        let w2 = omega * omega;
        let form = self.neutral_form(&(&self.fluct * fg), |x| Complex64::new(2.0 * w2 * x / (x * x + w2), 0.0))?;
        Ok(form[(0, 1)].re)
    }

    /// `⟨f̄, −ω² χ̃_sym(iω) g⟩` over `omegas` against the exact lattice limit and
    /// the weak-form gradient pairing with the ground-state density.
    pub fn johnson_sum_rule(
        &self,
        model: &LatticeModel,
        omegas: &[f64],
        f: &[f64],
        g: &[f64],
        stencil: GradientStencil,
    ) -> Result<SumRuleTable> {
        let fv = RVec::from_column_slice(f);
        let gv = RVec::from_column_slice(g);
        let limit = fv.dot(&(self.johnson_limit_matrix() * &gv));
        let weak = fv.dot(&(weak_form_matrix(model, &self.ground.rho, stencil) * &gv));
        SumRuleTable::new(omegas, |w| self.johnson_pairing(f, g, w), limit, weak)
    }

    /// `2 B*(H♯ − E)B` on nodal potentials.
    pub fn johnson_limit_matrix(&self) -> RMat {
        let e0 = self.ground.energy;
        let m = self.m();
        let hb = RMat::from_fn(self.h_n.dim(), m, |_, _| 0.0);
        let mut hb = hb;
        for j in 0..m {
            let col: Vec<f64> = self.fluct.column(j).iter().copied().collect();
            let h = self.h_n.apply(&col);
            for (k, v) in h.iter().enumerate() {
                hb[(k, j)] = v - e0 * col[k];
            }
        }
        let l = self.fluct.transpose() * hb * 2.0;
        (&l + l.transpose()) * 0.5
    }
}
