//! Python bindings.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cqed::engine::{self, Calibration, RecordData, Run};
use cqed::{coherent, fields, io, steady, verify};

fn to_py(e: cqed::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Qubit density matrix with one coherent field per qubit branch.
#[pyclass(name = "HybridState", frozen, from_py_object)]
#[derive(Clone)]
struct PyHybridState(cqed::HybridState);

#[pymethods]
impl PyHybridState {
    #[new]
    #[pyo3(signature = (rho00, rho11, rho10, alpha0=Complex64::new(0.0, 0.0), alpha1=Complex64::new(0.0, 0.0)))]
    fn new(rho00: f64, rho11: f64, rho10: Complex64, alpha0: Complex64, alpha1: Complex64) -> PyResult<Self> {
        cqed::HybridState::new(rho00, rho11, rho10, alpha0, alpha1).map(Self).map_err(to_py)
    }

    #[getter]
    fn rho00(&self) -> f64 {
        self.0.rho00()
    }

    #[getter]
    fn rho11(&self) -> f64 {
        self.0.rho11()
    }

    #[getter]
    fn rho10(&self) -> Complex64 {
        self.0.rho10()
    }

    #[getter]
    fn alpha0(&self) -> Complex64 {
        self.0.alpha0()
    }

    #[getter]
    fn alpha1(&self) -> Complex64 {
        self.0.alpha1()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn __repr__(&self) -> String {
        format!(
            "HybridState(rho00={}, rho11={}, rho10={}, alpha0={}, alpha1={})",
            self.0.rho00(),
            self.0.rho11(),
            self.0.rho10(),
            self.0.alpha0(),
            self.0.alpha1()
        )
    }
}

/// Simulated or filtered trajectory on the time grid.
#[pyclass(name = "Trajectory", frozen, get_all)]
struct PyTrajectory {
    times: Vec<f64>,
    rho11: Vec<f64>,
    rho10: Vec<Complex64>,
    alpha0: Vec<Complex64>,
    alpha1: Vec<Complex64>,
    /// Record values per interval (signal offset included).
    signal_i: Vec<f64>,
    signal_q: Option<Vec<f64>>,
    gamma_d: Vec<f64>,
    stark_s: Vec<f64>,
    log_likelihood: Option<(f64, f64)>,
}

impl PyTrajectory {
    fn from_record(rec: &cqed::TrajectoryRecord, rows: RecordData, likelihood: Option<(f64, f64)>) -> Self {
        Self {
            times: rec.times.clone(),
            rho11: rec.states.iter().map(|s| s.rho11()).collect(),
            rho10: rec.states.iter().map(|s| s.rho10()).collect(),
            alpha0: rec.states.iter().map(|s| s.alpha0()).collect(),
            alpha1: rec.states.iter().map(|s| s.alpha1()).collect(),
            signal_i: rows.i,
            signal_q: rows.q,
            gamma_d: rec.derived.iter().map(|d| d.gamma_d).collect(),
            stark_s: rec.derived.iter().map(|d| d.stark_s).collect(),
            log_likelihood: likelihood,
        }
    }
}

/// A validated run configuration (same JSON schema as the CLI).
#[pyclass(name = "Simulation", frozen)]
struct PySimulation {
    run: Run,
    seed: u64,
}

#[pymethods]
impl PySimulation {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = io::parse_config(text).map_err(to_py)?;
        Ok(Self { run: cfg.prepare().map_err(to_py)?, seed: cfg.seed })
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.run.times.clone()
    }

    #[getter]
    fn initial(&self) -> PyHybridState {
        PyHybridState(self.run.initial)
    }

    /// Simulates one trajectory; defaults to the configured seed.
    #[pyo3(signature = (seed=None))]
    fn trajectory(&self, seed: Option<u64>) -> PyResult<PyTrajectory> {
        let rec = engine::run_trajectory(&self.run, seed.unwrap_or(self.seed)).map_err(to_py)?;
        let rows = engine::record_rows(&rec);
        Ok(PyTrajectory::from_record(&rec, rows, None))
    }

    /// Calibration JSON matching a simulated trajectory.
    #[pyo3(signature = (seed=None))]
    fn calibration_json(&self, seed: Option<u64>) -> PyResult<String> {
        let rec = engine::run_trajectory(&self.run, seed.unwrap_or(self.seed)).map_err(to_py)?;
        serde_json::to_string(&engine::simulated_calibration(&rec)).map_err(json_err)
    }

    /// Record-averaged `rho10` on the grid.
    fn ensemble_rho10(&self) -> Vec<Complex64> {
        engine::ensemble_chain(&self.run).iter().map(|s| s.rho10()).collect()
    }

    /// Filters a record given as columns; `t` holds interval start times.
    #[pyo3(signature = (t, i, calibration_json, q=None, fixed_frame=false))]
    fn filter(&self, t: Vec<f64>, i: Vec<f64>, calibration_json: &str, q: Option<Vec<f64>>, fixed_frame: bool) -> PyResult<PyTrajectory> {
        let cal: Calibration = serde_json::from_str(calibration_json).map_err(json_err)?;
        let data = RecordData { times: t, i, q };
        let frame = if fixed_frame { engine::Frame::Fixed } else { engine::Frame::Informational };
        let out = engine::filter_record(&self.run, &data, &cal, frame).map_err(to_py)?;
        let l = (out.likelihood.global, out.likelihood.local);
        Ok(PyTrajectory::from_record(&out.record, data, Some(l)))
    }

    /// Derived quantities at time `t` for `state`, as a JSON object.
    fn derived_json(&self, state: &PyHybridState, t: f64) -> PyResult<String> {
        let d = fields::derived_quantities(&state.0, self.run.params(), self.run.settings(), t);
        serde_json::to_string(&d).map_err(json_err)
    }

    /// Steady-state fields and derived quantities, as JSON.
    #[pyo3(signature = (t=0.0))]
    fn steady_state_json(&self, t: f64) -> PyResult<String> {
        let s = steady::steady_state(self.run.params(), self.run.settings(), t).map_err(to_py)?;
        serde_json::to_string(&s).map_err(json_err)
    }
}

/// `<alpha|beta>`.
#[pyfunction]
fn inner_product(alpha: Complex64, beta: Complex64) -> Complex64 {
    coherent::inner_product(alpha, beta)
}

/// Fock amplitudes `<n|alpha>` for `n = 0..=n_max`.
#[pyfunction]
fn fock_amplitudes(alpha: Complex64, n_max: usize) -> Vec<Complex64> {
    coherent::fock_amplitudes(alpha, n_max)
}

#[pyfunction]
fn photon_pmf(alpha: Complex64, n: u64) -> f64 {
    coherent::photon_pmf(alpha, n)
}

/// Runs a verification suite and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=1))]
fn verify_json(suite: &str, seed: u64) -> PyResult<String> {
    let report = verify::run_suite(suite.parse().map_err(to_py)?, seed).map_err(to_py)?;
    serde_json::to_string(&report).map_err(json_err)
}

#[pymodule]
#[pyo3(name = "cqed_bayes")]
fn cqed_bayes_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHybridState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(inner_product, m)?)?;
    m.add_function(wrap_pyfunction!(fock_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(photon_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(verify_json, m)?)?;
    Ok(())
}
