use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &str) -> PyResult<()> {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(gw0lab::gw0lab)(py);
        let globals = PyDict::new(py);
        globals.set_item("gw0lab", m)?;
        py.run(&CString::new(code).unwrap(), Some(&globals), None)
    })
}

#[test]
fn model_and_oracle_from_python() {
    with_module(
        "m = gw0lab.Model()\n\
         assert m.sites == 8\n\
         o = gw0lab.Oracle(m)\n\
         assert abs(o.galitskii_migdal() - o.energy) < 1e-8 * abs(o.energy)\n\
         g = o.green(complex(o.mu, 2.0))\n\
         assert abs(g[0][1] - g[1][0]) < 1e-12\n",
    )
    .unwrap();
}

#[test]
fn solver_and_pipeline_from_python() {
    with_module(
        "c = gw0lab.Config.from_toml('[model]\\nn = 2\\nsites = 6\\n[grid]\\nk = 32\\n')\n\
         p = gw0lab.GwProblem(gw0lab.Model(c), k=32)\n\
         r = p.solve(0.0)\n\
         assert r.converged and r.residuals == [0.0]\n\
         ok, js = gw0lab.run(c, stage='rpa')\n\
         assert ok and '\"stage\": \"rpa\"' in js\n",
    )
    .unwrap();
}

#[test]
fn errors_surface_as_python_exceptions() {
    with_module(
        "try:\n    gw0lab.run(gw0lab.Config.reference(), stage='dft')\n    raise SystemExit(1)\n\
         except gw0lab.Gw0labError as e:\n    assert 'unknown stage' in str(e)\n",
    )
    .unwrap();
}
