//! Python bindings for the core numerical routines.

use ibc_lab_core::asym::{self, ProbeGrid};
use ibc_lab_core::config::ExperimentConfig;
use ibc_lab_core::ops::{self, RPiece};
use ibc_lab_core::{boundslab, model, runner, sector1, Error, QuadSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Schema { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn spec(rel_tol: f64, abs_tol: f64) -> PyResult<QuadSpec> {
    let s = QuadSpec::with_tol(rel_tol, abs_tol);
    s.validate().map_err(to_py)?;
    Ok(s)
}

/// A value with its estimated absolute error and the method that produced it.
#[pyclass(frozen, skip_from_py_object, name = "Estimate", module = "ibc_lab")]
#[derive(Clone)]
struct PyEstimate {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    error: f64,
    #[pyo3(get)]
    evaluations: u64,
    #[pyo3(get)]
    method: String,
}

impl From<ibc_lab_core::Estimate> for PyEstimate {
    fn from(e: ibc_lab_core::Estimate) -> Self {
        let method = serde_json::to_value(e.method)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        Self {
            value: e.value,
            error: e.error,
            evaluations: e.evaluations,
            method,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!("Estimate({:.10e} ± {:.2e}, {})", self.value, self.error, self.method)
    }

    fn __float__(&self) -> f64 {
        self.value
    }
}

/// Normalized isotropic Gaussian A (πa)^{-3/4} exp(-|x-c|²/2a).
#[pyclass(frozen, skip_from_py_object, name = "RadialTestFunction", module = "ibc_lab")]
#[derive(Clone)]
struct PyRadial {
    inner: ibc_lab_core::RadialTestFunction,
}

#[pymethods]
impl PyRadial {
    #[new]
    #[pyo3(signature = (width, center = [0.0, 0.0, 0.0], amplitude = 1.0))]
    fn new(width: f64, center: [f64; 3], amplitude: f64) -> PyResult<Self> {
        let inner = ibc_lab_core::RadialTestFunction::new(width)
            .map_err(to_py)?
            .with_center(center)
            .with_amplitude(amplitude);
        Ok(Self { inner })
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    #[getter]
    fn center(&self) -> [f64; 3] {
        self.inner.center
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.inner.amplitude
    }

    fn __call__(&self, x: [f64; 3]) -> f64 {
        self.inner.eval(x)
    }

    fn value_at_center(&self) -> f64 {
        self.inner.value_at_center()
    }

    fn __repr__(&self) -> String {
        format!(
            "RadialTestFunction(width={}, center={:?}, amplitude={})",
            self.inner.width, self.inner.center, self.inner.amplitude
        )
    }
}

fn params(m: f64) -> PyResult<model::ModelParams> {
    model::ModelParams::with_mass(m).map_err(to_py)
}

fn piece(name: &str) -> PyResult<RPiece> {
    match name {
        "diagonal" => Ok(RPiece::Diagonal),
        "off_diagonal" => Ok(RPiece::OffDiagonal),
        "total" => Ok(RPiece::Total),
        _ => Err(PyValueError::new_err(format!(
            "piece must be diagonal, off_diagonal or total, got '{name}'"
        ))),
    }
}

/// Coefficient γ_m of the logarithmic singularity.
#[pyfunction]
fn gamma_m(m: f64) -> f64 {
    model::gamma_m(m)
}

/// Coefficient m/(2π(2m+1)) of the 1/r singularity.
#[pyfunction]
fn b_coefficient(m: f64) -> f64 {
    model::b_coefficient(m)
}

#[pyfunction]
fn arctan_convolution(m: f64, beta: f64, gamma: f64, rho: f64) -> PyResult<f64> {
    model::arctan_convolution(m, beta, gamma, rho).map_err(to_py)
}

/// (Gψ)(s, s + r ẑ) for one particle in the vacuum sector.
#[pyfunction]
#[pyo3(signature = (m, psi, r, s = [0.0, 0.0, 0.0], rel_tol = 1e-8, abs_tol = 1e-12))]
fn apply_g_probe(py: Python<'_>, m: f64, psi: &PyRadial, r: f64, s: [f64; 3], rel_tol: f64, abs_tol: f64) -> PyResult<PyEstimate> {
    let (p, q, f) = (params(m)?, spec(rel_tol, abs_tol)?, psi.inner);
    py.detach(|| ops::apply_g_probe(&p, &f, s, [0.0, 0.0, r], &q))
        .map(Into::into)
        .map_err(to_py)
}

/// Boundary value (BGψ)(s) from a fit of the G probe.
#[pyfunction]
#[pyo3(signature = (m, psi, s = [0.0, 0.0, 0.0], r_min = 1e-4, r_max = 1e-1, points = 12))]
fn extract_b(py: Python<'_>, m: f64, psi: &PyRadial, s: [f64; 3], r_min: f64, r_max: f64, points: usize) -> PyResult<PyEstimate> {
    let (p, f) = (params(m)?, psi.inner);
    let grid = ProbeGrid::new(r_min, r_max, points).map_err(to_py)?;
    py.detach(|| asym::extract_b(&p, &f, s, &grid, &QuadSpec::default()))
        .map(Into::into)
        .map_err(to_py)
}

/// Finite part (AGψ)(s) from a fit of the G probe.
#[pyfunction]
#[pyo3(signature = (m, psi, s = [0.0, 0.0, 0.0], r_min = 1e-4, r_max = 1e-1, points = 12))]
fn extract_a(py: Python<'_>, m: f64, psi: &PyRadial, s: [f64; 3], r_min: f64, r_max: f64, points: usize) -> PyResult<PyEstimate> {
    let (p, f) = (params(m)?, psi.inner);
    let grid = ProbeGrid::new(r_min, r_max, points).map_err(to_py)?;
    py.detach(|| asym::extract_a(&p, &f, s, &grid, &QuadSpec::default()))
        .map(Into::into)
        .map_err(to_py)
}

/// (T_d ψ)(s) for one particle in the vacuum sector.
#[pyfunction]
#[pyo3(signature = (m, psi, s = [0.0, 0.0, 0.0]))]
fn td_position_value(m: f64, psi: &PyRadial, s: [f64; 3]) -> PyResult<PyEstimate> {
    ops::td_position_value(&params(m)?, &psi.inner, s, &QuadSpec::default())
        .map(Into::into)
        .map_err(to_py)
}

/// Fitted log r coefficient of the R probe; piece is diagonal, off_diagonal or total.
#[pyfunction]
#[pyo3(signature = (m, psi, piece_name = "total", r_min = 1e-4, r_max = 1e-1, points = 12))]
fn extract_log_coefficient(
    py: Python<'_>,
    m: f64,
    psi: &PyRadial,
    piece_name: &str,
    r_min: f64,
    r_max: f64,
    points: usize,
) -> PyResult<PyEstimate> {
    let (p, f, pc) = (params(m)?, psi.inner, piece(piece_name)?);
    let grid = ProbeGrid::new(r_min, r_max, points).map_err(to_py)?;
    py.detach(|| asym::extract_log_coefficient(&p, &f, [0.0; 3], pc, &grid, &QuadSpec::default()))
        .map(Into::into)
        .map_err(to_py)
}

/// Lowest root of the cutoff fiber equation.
#[pyfunction]
fn bare_fiber_energy(m: f64, lambda_cut: f64) -> PyResult<f64> {
    sector1::bare_fiber_energy(m, lambda_cut).map(|r| r.energy).map_err(to_py)
}

/// Renormalized fiber energy; route is transcendental or subtracted_quadrature.
#[pyfunction]
#[pyo3(signature = (m, route = "transcendental"))]
fn renormalized_fiber_energy(m: f64, route: &str) -> PyResult<f64> {
    let r = match route {
        "transcendental" => sector1::Route::Transcendental,
        "subtracted_quadrature" => sector1::Route::SubtractedQuadrature,
        _ => {
            return Err(PyValueError::new_err(format!(
                "route must be transcendental or subtracted_quadrature, got '{route}'"
            )))
        }
    };
    sector1::renormalized_fiber_energy(m, r, &QuadSpec::default())
        .map(|r| r.energy)
        .map_err(to_py)
}

/// (slope_linear, coeff_sqrt, intercept) of the bare energy over the cutoffs.
#[pyfunction]
fn divergence_fit(m: f64, lambdas: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = sector1::divergence_fit(m, &lambdas).map_err(to_py)?;
    Ok((f.slope_linear, f.coeff_sqrt, f.intercept))
}

#[pyfunction]
fn gbound_constant(m: f64, n: usize, s: f64) -> PyResult<PyEstimate> {
    boundslab::gbound_constant(m, n, s, &QuadSpec::default())
        .map(Into::into)
        .map_err(to_py)
}

/// (Λ, Λ′) grid surrogates of the Schur constants.
#[pyfunction]
#[pyo3(signature = (m, n, epsilon, particles = 1))]
fn schur_constants(py: Python<'_>, m: f64, n: usize, epsilon: f64, particles: usize) -> PyResult<(PyEstimate, PyEstimate)> {
    let c = py
        .detach(|| boundslab::schur_constants(m, particles, n, epsilon, &QuadSpec::default()))
        .map_err(to_py)?;
    Ok((c.lambda.into(), c.lambda_prime.into()))
}

#[pyfunction]
fn sbound_value(m: f64, n: usize, s: f64) -> PyResult<PyEstimate> {
    boundslab::sbound_integrals(m, n, s, &QuadSpec::default())
        .map(|b| b.value.into())
        .map_err(to_py)
}

/// Runs the experiments of a configuration text and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_text, output_dir = None))]
fn run(py: Python<'_>, config_text: &str, output_dir: Option<std::path::PathBuf>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::parse(config_text).map_err(to_py)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    let report = py.detach(|| runner::run(&cfg)).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

#[pymodule]
fn ibc_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyRadial>()?;
    m.add_function(wrap_pyfunction!(gamma_m, m)?)?;
    m.add_function(wrap_pyfunction!(b_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(arctan_convolution, m)?)?;
    m.add_function(wrap_pyfunction!(apply_g_probe, m)?)?;
    m.add_function(wrap_pyfunction!(extract_b, m)?)?;
    m.add_function(wrap_pyfunction!(extract_a, m)?)?;
    m.add_function(wrap_pyfunction!(td_position_value, m)?)?;
    m.add_function(wrap_pyfunction!(extract_log_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(bare_fiber_energy, m)?)?;
    m.add_function(wrap_pyfunction!(renormalized_fiber_energy, m)?)?;
    m.add_function(wrap_pyfunction!(divergence_fit, m)?)?;
    m.add_function(wrap_pyfunction!(gbound_constant, m)?)?;
    m.add_function(wrap_pyfunction!(schur_constants, m)?)?;
    m.add_function(wrap_pyfunction!(sbound_value, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
