//! Python bindings for `conedet`.

use std::path::PathBuf;

use conedet::cli::{self, suites};
use conedet::conekernel::{heat_kernel_cone, trace_defect_closed, trace_defect_numeric, ConeParams};
use conedet::specialfn::{dedekind_eta, theta1 as theta1_rs, theta1_prime0 as theta1_prime0_rs, Modulus};
use conedet::spectral::{self, HeatCoefficients};
use conedet::surface::load_surface_file;
use conedet::torusmetrics::{self, load_metric, ConicalTorusMetric};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pyconedet, ConedetError, PyRuntimeError, "A computation in conedet failed.");

fn err(e: impl std::fmt::Display) -> PyErr {
    ConedetError::new_err(e.to_string())
}

fn modulus(sigma: Complex64) -> PyResult<Modulus> {
    Modulus::new(sigma).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn metric(doc: &str) -> PyResult<ConicalTorusMetric> {
    load_metric(doc).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Dedekind eta at the modulus sigma.
#[pyfunction]
fn eta(sigma: Complex64) -> PyResult<Complex64> {
    Ok(dedekind_eta(&modulus(sigma)?))
}

/// Jacobi theta_1(z | sigma).
#[pyfunction]
fn theta1(z: Complex64, sigma: Complex64) -> PyResult<Complex64> {
    Ok(theta1_rs(z, &modulus(sigma)?))
}

#[pyfunction]
fn theta1_prime0(sigma: Complex64) -> PyResult<Complex64> {
    theta1_prime0_rs(&modulus(sigma)?).map_err(err)
}

/// Heat kernel of the infinite cone of angle beta between (r, theta) and (rho, psi).
#[pyfunction]
fn cone_kernel(beta: f64, r: f64, theta: f64, rho: f64, psi: f64, t: f64) -> PyResult<f64> {
    let p = ConeParams::new(beta).map_err(err)?;
    heat_kernel_cone(&p, r, theta, rho, psi, t).map_err(err)
}

/// (numeric, closed form) heat-trace defect of the cone tip over radius R.
#[pyfunction]
#[pyo3(signature = (beta, t=0.01, radius=1.0))]
fn trace_defect(beta: f64, t: f64, radius: f64) -> PyResult<(f64, f64)> {
    let p = ConeParams::new(beta).map_err(err)?;
    Ok((
        trace_defect_numeric(&p, radius, t).map_err(err)?,
        trace_defect_closed(beta).map_err(err)?,
    ))
}

#[pyfunction]
fn zeta_zero(angles: Vec<f64>, genus: usize) -> PyResult<f64> {
    spectral::zeta_zero(&angles, genus).map(|z| z.value).map_err(err)
}

#[pyfunction]
fn rescaling_exponent(angles: Vec<f64>, genus: usize) -> PyResult<f64> {
    spectral::rescaling_exponent(&angles, genus).map_err(err)
}

/// Topology, area and cone data of a surface file.
#[pyfunction]
fn surface_info<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let s = load_surface_file(&path).map_err(err)?;
    to_py(py, &cli::surface_info(&s))
}

/// Richardson-extrapolated Laplacian eigenvalues, zero mode first.
#[pyfunction]
#[pyo3(signature = (path, count, levels=None))]
fn spectrum(py: Python<'_>, path: PathBuf, count: usize, levels: Option<usize>) -> PyResult<Vec<f64>> {
    let s = load_surface_file(&path).map_err(err)?;
    let spec = py
        .detach(|| suites::fem_spectrum(&s, None, levels, count))
        .map_err(err)?;
    Ok(spec.eigenvalues)
}

/// Zeta-regularized log det of a surface file, as a dict.
#[pyfunction]
#[pyo3(signature = (path, count, levels=None))]
fn log_det<'py>(py: Python<'py>, path: PathBuf, count: usize, levels: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let s = load_surface_file(&path).map_err(err)?;
    let r = py
        .detach(|| -> Result<_, cli::CliError> {
            let spec = suites::fem_spectrum(&s, None, levels, count)?;
            Ok(spectral::log_det(&spec, &HeatCoefficients::for_surface(&s)?, None)?)
        })
        .map_err(err)?;
    to_py(py, &r)
}

/// Right-hand side of the torus determinant formula, without its constant.
#[pyfunction]
fn mt_predictor(metric_json: &str) -> PyResult<f64> {
    metric(metric_json)?.mt_predictor().map_err(err)
}

#[pyfunction]
fn polyakov_ratio(m1_json: &str, m2_json: &str) -> PyResult<f64> {
    torusmetrics::polyakov_ratio(&metric(m1_json)?, &metric(m2_json)?).map_err(err)
}

#[pyfunction]
fn three_polyhedra_product(l_json: &str, m_json: &str, n_json: &str) -> PyResult<f64> {
    torusmetrics::three_polyhedra_product(&metric(l_json)?, &metric(m_json)?, &metric(n_json)?).map_err(err)
}

/// Runs the command line with the given arguments (without the program name).
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("conedet".to_string()).chain(args).collect();
    py.detach(|| cli::run(argv))
}

#[pymodule]
fn pyconedet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConedetError", m.py().get_type::<ConedetError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    let meta = PyDict::new(m.py());
    meta.set_item("threads_env", cli::THREADS_ENV)?;
    m.add("config", meta)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(theta1, m)?)?;
    m.add_function(wrap_pyfunction!(theta1_prime0, m)?)?;
    m.add_function(wrap_pyfunction!(cone_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(trace_defect, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_zero, m)?)?;
    m.add_function(wrap_pyfunction!(rescaling_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(surface_info, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(log_det, m)?)?;
    m.add_function(wrap_pyfunction!(mt_predictor, m)?)?;
    m.add_function(wrap_pyfunction!(polyakov_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(three_polyhedra_product, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
