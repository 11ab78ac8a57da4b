//! Python bindings. Configurations are passed as JSON text (the same schema
//! the CLI reads); results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use thermistor_core::coupler::{homotopy_sweep, run_simulation, slab_criterion};
use thermistor_core::estimates::{gronwall_bound, small_lemma_check, ynb_check};
use thermistor_core::oracle::{verify_suite, Suite};
use thermistor_core::{parse_config, to_canonical_json, verify_h1, write_outputs, Error, SolverConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_object<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config(text: &str) -> PyResult<SolverConfig> {
    parse_config(text).map_err(to_py)
}

/// Validates a configuration and returns its canonical JSON form.
#[pyfunction]
fn canonical_config(text: &str) -> PyResult<String> {
    to_canonical_json(&config(text)?).map_err(to_py)
}

/// Runs a simulation. Returns sup norms, the final fields and the estimate
/// time series; writes the usual output files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (text, out_dir=None))]
fn run<'py>(py: Python<'py>, text: &str, out_dir: Option<String>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(text)?;
    let (traj, error) = py.detach(|| match run_simulation(&cfg) {
        Ok(t) => (t, None),
        Err(a) => {
            let a = *a;
            (a.partial, Some(a.error))
        }
    });
    if let Some(dir) = &out_dir {
        write_outputs(&traj, &cfg, dir.as_ref(), error.as_ref()).map_err(to_py)?;
    }
    if let Some(e) = error {
        return Err(to_py(e));
    }
    let last = traj
        .final_state()
        .ok_or_else(|| PyRuntimeError::new_err("empty trajectory"))?;
    let grid = last.u.grid();
    let coords: Vec<[f64; 2]> = (0..grid.node_count()).map(|n| grid.coords(n).into()).collect();
    let v = json!({
        "steps": traj.states.len() - 1,
        "t": last.t,
        "u_sup": traj.u_sup(),
        "phi_sup": traj.phi_sup(),
        "coords": coords,
        "u": last.u.values(),
        "phi": last.phi.values(),
        "reports": traj.reports,
    });
    to_object(py, &v)
}

/// Runs each homotopy level; one dict per level in the given order.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, text: &str, eps: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(text)?;
    let res = py.detach(|| homotopy_sweep(&cfg, &eps)).map_err(to_py)?;
    to_object(py, &res)
}

/// Samples the configured conductivity against its H1 constants.
#[pyfunction]
#[pyo3(signature = (text, s_max, samples=2001))]
fn check_h1<'py>(py: Python<'py>, text: &str, s_max: f64, samples: usize) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(text)?;
    let r = verify_h1(&cfg.sigma, &cfg.h1, s_max, samples).map_err(to_py)?;
    let v: Value = json!({"report": r, "ok": r.all_ok()});
    to_object(py, &v)
}

#[pyfunction]
fn slab<'py>(py: Python<'py>, eps_coef: f64, b: f64, c: f64) -> PyResult<Bound<'py, PyAny>> {
    to_object(py, &slab_criterion(eps_coef, b, c).map_err(to_py)?)
}

#[pyfunction]
fn gronwall(h0: f64, c: f64, g: Vec<f64>, t: Vec<f64>) -> PyResult<Vec<f64>> {
    gronwall_bound(h0, c, &g, &t).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (c, b, alpha, y0, n_max=200))]
fn ynb<'py>(py: Python<'py>, c: f64, b: f64, alpha: f64, y0: f64, n_max: usize) -> PyResult<Bound<'py, PyAny>> {
    to_object(py, &ynb_check(c, b, alpha, y0, n_max).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (b0, lam, alpha, k_max=1000))]
fn small_lemma<'py>(py: Python<'py>, b0: f64, lam: f64, alpha: f64, k_max: usize) -> PyResult<Bound<'py, PyAny>> {
    to_object(py, &small_lemma_check(b0, lam, alpha, k_max).map_err(to_py)?)
}

/// Runs an oracle suite: "elliptic", "parabolic" or "mms".
#[pyfunction]
fn verify<'py>(py: Python<'py>, suite: &str) -> PyResult<Bound<'py, PyAny>> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let report = py.detach(|| verify_suite(suite)).map_err(to_py)?;
    to_object(py, &json!({"passed": report.passed(), "report": report}))
}

#[pymodule]
fn thermistor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonical_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(check_h1, m)?)?;
    m.add_function(wrap_pyfunction!(slab, m)?)?;
    m.add_function(wrap_pyfunction!(gronwall, m)?)?;
    m.add_function(wrap_pyfunction!(ynb, m)?)?;
    m.add_function(wrap_pyfunction!(small_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
