//! Python bindings for the gw0lab core: lattice models, the exact oracle,
//! RPA screening, the GW⁰ solver and full pipeline runs.

use std::path::PathBuf;
use std::sync::Arc;

use gw0lab_core::config::{parse_config, render_config, RunConfig};
use gw0lab_core::fock::{ExactOracle, OracleOptions};
use gw0lab_core::freq::make_grid;
use gw0lab_core::linalg::{CMat, RMat};
use gw0lab_core::model::{build_lattice, solve_mean_field, LatticeModel, MeanFieldState};
use gw0lab_core::pipeline::{parse_stage, run_pipeline, PipelineOptions};
use gw0lab_core::screening::{build_screening, RpaModel};
use gw0lab_core::solver::{GwProblem, SolverConfig};
use gw0lab_core::GwError;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(gw0lab, Gw0labError, PyException);

fn err(e: GwError) -> PyErr {
    Gw0labError::new_err(e.to_string())
}

fn rows(a: &RMat) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

fn crows(a: &CMat) -> Vec<Vec<Complex64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

/// Run configuration, read from and written to TOML.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn reference() -> Self {
        PyConfig {
            inner: RunConfig::reference(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        parse_config(text).map(|inner| PyConfig { inner }).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        render_config(&self.inner).map_err(err)
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.model.sites
    }

    #[getter]
    fn electrons(&self) -> usize {
        self.inner.model.n
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.run.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.run.seed = seed;
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.solver.lambda.clone()
    }

    #[setter]
    fn set_lambdas(&mut self, l: Vec<f64>) {
        self.inner.solver.lambda = l;
    }

    #[getter]
    fn grid_k(&self) -> usize {
        self.inner.grid.k
    }

    #[setter]
    fn set_grid_k(&mut self, k: usize) {
        self.inner.grid.k = k;
    }

    fn __repr__(&self) -> String {
        format!("Config(sites={}, n={}, k={})", self.inner.model.sites, self.inner.model.n, self.inner.grid.k)
    }
}

/// Lattice model with its mean-field reference.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    model: Arc<LatticeModel>,
    mf: Arc<MeanFieldState>,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<PyConfig>) -> PyResult<Self> {
        let cfg = config.map_or_else(RunConfig::reference, |c| c.inner);
        cfg.validate().map_err(err)?;
        let model = cfg.model_config().and_then(|c| build_lattice(&c)).map_err(err)?;
        let mf = solve_mean_field(&model, cfg.model.n).map_err(err)?;
        Ok(PyModel {
            model: Arc::new(model),
            mf: Arc::new(mf),
        })
    }

    #[getter]
    fn sites(&self) -> usize {
        self.model.m()
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.model.weight()
    }

    #[getter]
    fn h1(&self) -> Vec<Vec<f64>> {
        rows(&self.model.h1)
    }

    #[getter]
    fn coulomb(&self) -> Vec<Vec<f64>> {
        rows(&self.model.coulomb)
    }

    #[getter]
    fn gamma0(&self) -> Vec<Vec<f64>> {
        rows(&self.mf.gamma0)
    }

    #[getter]
    fn orbital_energies(&self) -> Vec<f64> {
        self.mf.eps.to_vec()
    }

    #[getter]
    fn mu0(&self) -> f64 {
        self.mf.mu0
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.mf.gap
    }
}

/// Exact ground state and Green's function in the Fock space.
#[pyclass(name = "Oracle", frozen)]
struct PyOracle {
    inner: ExactOracle,
}

#[pymethods]
impl PyOracle {
    #[new]
    #[pyo3(signature = (model, n = None))]
    fn new(py: Python<'_>, model: &PyModel, n: Option<usize>) -> PyResult<Self> {
        let n = n.unwrap_or(model.mf.n_elec);
        let m = model.model.clone();
        let inner = py
            .detach(move || ExactOracle::new(&m, n, &OracleOptions::default()))
            .map_err(err)?;
        Ok(PyOracle { inner })
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.window.mu
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        (self.inner.window.e_minus, self.inner.window.e_plus)
    }

    #[getter]
    fn gamma(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.ground.gamma)
    }

    /// `G̃(z)` of the interacting system.
    fn green(&self, z: Complex64) -> PyResult<Vec<Vec<Complex64>>> {
        self.inner.exact_green(z).map(|g| crows(&g)).map_err(err)
    }

    fn galitskii_migdal(&self) -> PyResult<f64> {
        self.inner.galitskii_migdal().map_err(err)
    }
}

/// RPA screening in closed form on the imaginary axis.
#[pyclass(name = "Screening", frozen)]
struct PyScreening {
    rpa: RpaModel,
}

#[pymethods]
impl PyScreening {
    #[new]
    fn new(model: &PyModel) -> Self {
        PyScreening {
            rpa: RpaModel::new(&model.model, &model.mf),
        }
    }

    fn p0(&self, omega: f64) -> Vec<Vec<Complex64>> {
        crows(&self.rpa.p0_sym(Complex64::new(0.0, omega)))
    }

    fn chi0(&self, omega: f64) -> PyResult<Vec<Vec<Complex64>>> {
        self.rpa.chi0(Complex64::new(0.0, omega)).map(|c| crows(&c)).map_err(err)
    }

    fn w0c(&self, omega: f64) -> PyResult<Vec<Vec<Complex64>>> {
        self.rpa.w0c(Complex64::new(0.0, omega)).map(|c| crows(&c)).map_err(err)
    }
}

/// Result of one Picard solve.
#[pyclass(name = "SolverReport", frozen, get_all)]
struct PySolverReport {
    lambda_: f64,
    residuals: Vec<f64>,
    contraction: Option<f64>,
    converged: bool,
    iterations: usize,
    fixed_point_residual: f64,
}

/// The GW⁰_λ fixed-point problem on a frequency grid.
#[pyclass(name = "GwProblem", frozen)]
struct PyGwProblem {
    inner: GwProblem,
}

#[pymethods]
impl PyGwProblem {
    #[new]
    #[pyo3(signature = (model, k = 128, seed = 0))]
    fn new(py: Python<'_>, model: &PyModel, k: usize, seed: u64) -> PyResult<Self> {
        let (m, mf) = (model.model.clone(), model.mf.clone());
        let inner = py
            .detach(move || {
                let grid = Arc::new(make_grid(k, mf.gap)?);
                let sc = build_screening(&RpaModel::new(&m, &mf), grid)?;
                GwProblem::new(&m, sc, seed)
            })
            .map_err(err)?;
        Ok(PyGwProblem { inner })
    }

    #[getter]
    fn lambda_star(&self) -> f64 {
        self.inner.bounds.lambda_star
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.grid().nodes.clone()
    }

    #[getter]
    fn exchange(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.kx)
    }

    /// `Σ̃_c(μ₀ + iω_j)` of the one-shot G₀W⁰ at every grid node.
    fn sigma_c_g0w0(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner.sigma00.sigma_c.values.iter().map(crows).collect()
    }

    #[pyo3(signature = (lam, tol = 1e-8, max_iter = 200, mixing = 1.0))]
    fn solve(&self, py: Python<'_>, lam: f64, tol: f64, max_iter: usize, mixing: f64) -> PyResult<PySolverReport> {
        let mut cfg = SolverConfig::new(self.inner.grid().clone(), lam);
        cfg.tol = tol;
        cfg.max_iter = max_iter;
        cfg.mixing = mixing;
        let (_, _, r) = py.detach(|| self.inner.picard(&cfg)).map_err(err)?;
        Ok(PySolverReport {
            lambda_: r.lambda,
            residuals: r.residuals,
            contraction: r.contraction,
            converged: r.converged,
            iterations: r.iterations,
            fixed_point_residual: r.fixed_point_residual,
        })
    }
}

/// Runs a pipeline stage and returns the JSON summary.
#[pyfunction]
#[pyo3(signature = (config = None, stage = "check", validate = false, out = None))]
fn run(py: Python<'_>, config: Option<PyConfig>, stage: &str, validate: bool, out: Option<PathBuf>) -> PyResult<(bool, String)> {
    let cfg = config.map_or_else(RunConfig::reference, |c| c.inner);
    let opts = PipelineOptions {
        stage: parse_stage(stage).map_err(err)?,
        validate,
        out,
    };
    let r = py.detach(|| run_pipeline(&cfg, &opts)).map_err(err)?;
    Ok((r.summary.passed, r.summary.to_json()))
}

#[pymodule]
pub fn gw0lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("Gw0labError", m.py().get_type::<Gw0labError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyScreening>()?;
    m.add_class::<PyGwProblem>()?;
    m.add_class::<PySolverReport>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_conversion_keeps_layout() {
        let a = RMat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(rows(&a), vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let c = CMat::from_fn(2, 2, |i, j| Complex64::new(i as f64, j as f64));
        assert_eq!(crows(&c)[1][0], Complex64::new(1.0, 0.0));
    }
}
