//! Python bindings for operators, cell solves, layer limits and the harness.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use parahom::cell::{ergodic_constant, CellConfig, CellMethod};
use parahom::expansion::{pucci_gamma_example, rate_fit as core_rate_fit, sample_slow_fast};
use parahom::harness::{run, validate, ExperimentConfig};
use parahom::initial_layer::{solve_base_layer, LayerSetup};
use parahom::operator::{FullyNonlinearOp, Pt, SymMat};
use parahom::pde_core::{SlowGrid, TorusGrid};
use parahom::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::OperatorDefinition(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_matrix(n: usize, p: Vec<f64>) -> PyResult<SymMat> {
    match (n, p.as_slice()) {
        (1, [v]) => Ok(SymMat::scalar(*v)),
        (2, [a, b, c]) => Ok(SymMat::new2(*a, *b, *c)),
        _ => Err(PyValueError::new_err(format!("dimension {n} needs {} matrix entries", if n == 1 { 1 } else { 3 }))),
    }
}

/// A fully nonlinear operator `F(P, x, t, y, s)`.
#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    op: FullyNonlinearOp,
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    #[pyo3(signature = (n=1))]
    fn heat(n: usize) -> Self {
        PyOperator { op: FullyNonlinearOp::heat(n) }
    }

    /// `a(y) p` with `a(y) = 1/(2 + sin 2πy)`.
    #[staticmethod]
    fn harmonic_1d() -> Self {
        PyOperator { op: FullyNonlinearOp::harmonic_1d() }
    }

    #[staticmethod]
    #[pyo3(signature = (lo, hi, n=1))]
    fn pucci_minus(lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        FullyNonlinearOp::pucci_minus(n, lo, hi).map(|op| PyOperator { op }).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (lo, hi, n=1))]
    fn pucci_plus(lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        FullyNonlinearOp::pucci_plus(n, lo, hi).map(|op| PyOperator { op }).map_err(py_err)
    }

    /// Builds the operator block of an experiment config document.
    #[staticmethod]
    fn from_config(json: &str) -> PyResult<Self> {
        let cfg = ExperimentConfig::from_json(json).map_err(py_err)?;
        cfg.build_operator().map(|op| PyOperator { op }).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.op.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.op.n
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.op.lambda
    }

    #[getter]
    fn cap_lambda(&self) -> f64 {
        self.op.cap_lambda
    }

    fn is_linear(&self) -> bool {
        self.op.is_linear()
    }

    /// `F(P, x, t, y, s)`; `P` is `[p]` or `[p11, p12, p22]`.
    #[pyo3(signature = (p, x=0.0, t=0.0, y=0.0, s=0.0))]
    fn eval(&self, p: Vec<f64>, x: f64, t: f64, y: f64, s: f64) -> PyResult<f64> {
        let m = to_matrix(self.op.n, p)?;
        self.op.eval(&m, &Pt::new(x, t, [y, 0.0], s)).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Operator({}, n={}, λ={}, Λ={})", self.op.name, self.op.n, self.op.lambda, self.op.cap_lambda)
    }
}

/// Ergodic constant `F̄(P, x, t)` from a cell solve on an `ny`-point lattice.
#[pyfunction]
#[pyo3(signature = (op, p, ny=32, x=0.0, t=0.0, method="long-time-slope"))]
fn effective_operator(op: &PyOperator, p: Vec<f64>, ny: usize, x: f64, t: f64, method: &str) -> PyResult<f64> {
    let method = match method {
        "long-time-slope" => CellMethod::LongTimeSlope,
        "penalization" => CellMethod::Penalization,
        m => return Err(PyValueError::new_err(format!("unknown method {m:?}"))),
    };
    let grid = TorusGrid::for_ellipticity(op.op.n, ny, op.op.cap_lambda).map_err(py_err)?;
    let m = to_matrix(op.op.n, p)?;
    ergodic_constant(&op.op, &grid, &m, x, t, method, &CellConfig::default()).map(|s| s.gamma).map_err(py_err)
}

/// Effective datum of the layer flow started from `phi(y)` sampled at `ny`
/// points; returns the limit and the fitted decay rate.
#[pyfunction]
fn layer_limit(op: &PyOperator, phi: Vec<f64>) -> PyResult<(f64, Option<f64>)> {
    let ny = phi.len();
    let slow = SlowGrid::new(8, op.op.period, 1.0).map_err(py_err)?;
    let setup = LayerSetup::new(&op.op, ny, slow.clone(), vec![0.0]).map_err(py_err)?;
    let g = |_: f64, y: f64| phi[((y * ny as f64).round() as usize) % ny];
    let st = solve_base_layer(&op.op, &setup, sample_slow_fast(&g, &slow, ny)).map_err(py_err)?;
    Ok((st.gbreve[0][0], st.fits[0].as_ref().map(|f| f.rate)))
}

/// `(γ₊, γ₋)` of Pucci's operators for `φ(y) = cos 2πy`.
#[pyfunction]
#[pyo3(signature = (lo, hi, ny=32))]
fn pucci_gammas(lo: f64, hi: f64, ny: usize) -> PyResult<(f64, f64)> {
    let phi = |y: f64| (std::f64::consts::TAU * y).cos();
    let one = |_: f64| 1.0;
    let r = pucci_gamma_example(lo, hi, &phi, &one, &one, ny, 8).map_err(py_err)?;
    Ok((r.gamma_plus, r.gamma_minus))
}

/// Least-squares slope of `log err` against `log ε` and its pass flag.
#[pyfunction]
#[pyo3(signature = (eps, errs, target, margin=0.3))]
fn rate_fit(eps: Vec<f64>, errs: Vec<f64>, target: f64, margin: f64) -> PyResult<(f64, bool)> {
    core_rate_fit(&eps, &errs, target, margin).map(|f| (f.slope, f.pass)).map_err(py_err)
}

/// Validates a config document; returns the report as JSON.
#[pyfunction]
fn validate_config(json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(json).map_err(py_err)?;
    let r = validate(&cfg).map_err(py_err)?;
    serde_json::to_string_pretty(&r).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs a config document into `out`; returns the manifest as JSON.
#[pyfunction]
fn run_config(py: Python<'_>, json: &str, out: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(json).map_err(py_err)?;
    let m = py.detach(|| run(&cfg, std::path::Path::new(out))).map_err(py_err)?;
    serde_json::to_string_pretty(&m).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
pub fn parahom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(effective_operator, m)?)?;
    m.add_function(wrap_pyfunction!(layer_limit, m)?)?;
    m.add_function(wrap_pyfunction!(pucci_gammas, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
