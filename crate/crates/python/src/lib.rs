//! Python bindings: build transition maps, roll them out, estimate Lyapunov
//! spectra, and run the packaged experiments.

use std::str::FromStr;

use lyra::diffcore::jacobian_state;
use lyra::dynsys::{SystemId, TransitionMap};
use lyra::linalg::Matrix;
use lyra::lyap::{rollout, spectrum, Estimator, EstimatorOptions, LyapunovSpectrum, Trajectory as CoreTrajectory};
use lyra_cli::config::{Experiment, ExperimentConfig, Overrides};
use lyra_cli::presets::{preset, PRESETS};
use lyra_cli::run::{run_invariance, run_optimize, run_rollout, run_spectrum, run_sweep, run_validate, Outcome};
use lyra_cli::CliError;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(lyra, LyraError, PyException, "Simulation or numerical failure.");

fn core_err(e: lyra::Error) -> PyErr {
    match e {
        lyra::Error::InvalidParameter { .. } | lyra::Error::Dimension { .. } => PyValueError::new_err(e.to_string()),
        e => LyraError::new_err(e.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config { .. } => PyValueError::new_err(e.to_string()),
        e => LyraError::new_err(e.to_string()),
    }
}

fn parse_estimator(name: &str) -> PyResult<Estimator> {
    Estimator::from_str(name).map_err(core_err)
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

/// A discrete-time transition map `x' = f(x; theta)`.
#[pyclass(name = "TransitionMap", module = "lyra", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMap {
    inner: TransitionMap,
}

#[pymethods]
impl PyMap {
    /// Built-in system with its default parameters: one of `systems()`.
    #[staticmethod]
    fn preset(system: &str) -> PyResult<Self> {
        let id = SystemId::from_str(system).map_err(core_err)?;
        Ok(Self {
            inner: TransitionMap::preset(id),
        })
    }

    /// `x' = A x` for a square matrix given as a list of rows.
    #[staticmethod]
    fn linear(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = matrix.len();
        if matrix.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let a = Matrix::from_row_major(n, n, matrix.concat());
        Ok(Self {
            inner: TransitionMap::linear(a).map_err(core_err)?,
        })
    }

    #[staticmethod]
    fn logistic(r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: TransitionMap::logistic(r).map_err(core_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (a = 1.4, b = 0.3))]
    fn henon(a: f64, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: TransitionMap::henon(a, b).map_err(core_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (mu = 2.0, dt = 1e-3))]
    fn vanderpol(mu: f64, dt: f64) -> PyResult<Self> {
        Ok(Self {
            inner: TransitionMap::vanderpol(mu, dt).map_err(core_err)?,
        })
    }

    #[getter]
    fn system(&self) -> &'static str {
        self.inner.system().as_str()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[getter]
    fn param_names(&self) -> Vec<String> {
        self.inner.param_names().to_vec()
    }

    fn param(&self, name: &str) -> PyResult<f64> {
        self.inner
            .param(name)
            .ok_or_else(|| PyValueError::new_err(format!("no parameter `{name}`")))
    }

    /// Copy with one parameter replaced.
    fn with_param(&self, name: &str, value: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_param(name, value).map_err(core_err)?,
        })
    }

    fn default_initial_state(&self) -> Vec<f64> {
        self.inner.default_initial_state()
    }

    fn step(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.step(&x).map_err(core_err)
    }

    /// State Jacobian at `x` by forward-mode differentiation, as rows.
    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = jacobian_state(&self.inner, &x, self.inner.params()).map_err(core_err)?;
        Ok(rows(&j.entries))
    }

    fn rollout(&self, py: Python<'_>, x0: Vec<f64>, steps: usize) -> PyResult<PyTrajectory> {
        let map = self.inner.clone();
        let inner = py.detach(move || rollout(&map, &x0, steps)).map_err(core_err)?;
        Ok(PyTrajectory { inner })
    }

    fn __repr__(&self) -> String {
        format!("TransitionMap({}, state_dim={}, dt={})", self.system(), self.state_dim(), self.dt())
    }
}

/// States `x_0 .. x_N` of one rollout.
#[pyclass(name = "Trajectory", module = "lyra", frozen)]
struct PyTrajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states().map(<[f64]>::to_vec).collect()
    }

    fn last(&self) -> Vec<f64> {
        self.inner.last().to_vec()
    }

    /// Lyapunov spectrum of this trajectory.
    #[pyo3(signature = (estimator = "qr_propagated", burn_in = 0))]
    fn spectrum(&self, py: Python<'_>, estimator: &str, burn_in: usize) -> PyResult<PySpectrum> {
        let est = parse_estimator(estimator)?;
        let opts = EstimatorOptions {
            burn_in,
            ..EstimatorOptions::default()
        };
        let inner = py.detach(|| spectrum(&self.inner, est, opts)).map_err(core_err)?;
        Ok(PySpectrum { inner })
    }
}

/// Exponents in units of 1/time, sorted descending.
#[pyclass(name = "Spectrum", module = "lyra", frozen)]
struct PySpectrum {
    inner: LyapunovSpectrum,
}

#[pymethods]
impl PySpectrum {
    #[getter]
    fn exponents(&self) -> Vec<f64> {
        self.inner.exponents.clone()
    }

    /// Exponents times the step length.
    #[getter]
    fn per_step(&self) -> Vec<f64> {
        self.inner.per_step()
    }

    /// The robustness metric: sum of the exponents.
    #[getter]
    fn l_lambda(&self) -> f64 {
        self.inner.metric().l_lambda
    }

    #[getter]
    fn estimator(&self) -> &'static str {
        self.inner.estimator.as_str()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    /// Running estimate as `(steps, rows)`.
    fn trace(&self) -> (Vec<usize>, Vec<Vec<f64>>) {
        (self.inner.trace.steps.clone(), self.inner.trace.values.clone())
    }

    fn __repr__(&self) -> String {
        format!("Spectrum({:?}, l_lambda={:e}, estimator={})", self.inner.exponents, self.l_lambda(), self.estimator())
    }
}

/// Roll out `map` from `x0` and estimate its spectrum in one call.
#[pyfunction]
#[pyo3(signature = (map, x0, steps, estimator = "qr_propagated", burn_in = 0))]
fn lyapunov_spectrum(
    py: Python<'_>,
    map: &PyMap,
    x0: Vec<f64>,
    steps: usize,
    estimator: &str,
    burn_in: usize,
) -> PyResult<PySpectrum> {
    map.rollout(py, x0, steps)?.spectrum(py, estimator, burn_in)
}

#[pyfunction]
fn systems() -> Vec<&'static str> {
    SystemId::ALL.iter().map(|s| s.as_str()).collect()
}

#[pyfunction]
fn estimators() -> Vec<&'static str> {
    Estimator::ALL.iter().map(|e| e.as_str()).collect()
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

fn outcome_dict<'py>(py: Python<'py>, outcome: Outcome) -> PyResult<Bound<'py, PyDict>> {
    let json = py.import("json")?;
    let d = match &outcome.record {
        Some(r) => json.call_method1("loads", (r.to_json(),))?.cast_into::<PyDict>()?,
        None => PyDict::new(py),
    };
    let tables = PyDict::new(py);
    for (ext, text) in &outcome.tables {
        tables.set_item(*ext, text)?;
    }
    d.set_item("tables", tables)?;
    outcome.into_result().map_err(cli_err)?;
    Ok(d)
}

/// Run an experiment command on a preset name or a TOML config string and
/// return the result record as a dict; tables are under `"tables"`.
#[pyfunction]
#[pyo3(signature = (command, preset = None, config = None, seed = None, estimator = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    preset: Option<&str>,
    config: Option<&str>,
    seed: Option<u64>,
    estimator: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    if command == "validate" {
        let seed = seed.unwrap_or(0);
        let outcome = py.detach(|| run_validate(false, &"0".repeat(64), seed));
        return outcome_dict(py, outcome);
    }
    let mut cfg = match (preset, config) {
        (Some(name), None) => self::preset_config(name)?,
        (None, Some(text)) => ExperimentConfig::from_toml(text).map_err(cli_err)?,
        _ => return Err(PyValueError::new_err("pass exactly one of preset= or config=")),
    };
    cfg.apply(&Overrides {
        seed,
        estimator: estimator.map(parse_estimator).transpose()?,
        out: None,
    });
    let exp = Experiment::new(cfg).map_err(cli_err)?;
    let outcome = py
        .detach(|| match command {
            "rollout" => run_rollout(&exp),
            "spectrum" => run_spectrum(&exp),
            "invariance" => run_invariance(&exp),
            "sweep" => run_sweep(&exp),
            "optimize" => run_optimize(&exp),
            other => Err(CliError::config("command", format!("unknown command `{other}`"))),
        })
        .map_err(cli_err)?;
    outcome_dict(py, outcome)
}

fn preset_config(name: &str) -> PyResult<ExperimentConfig> {
    preset(name).map_err(cli_err)
}

#[pymodule(name = "lyra")]
fn lyra_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(lyapunov_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(systems, m)?)?;
    m.add_function(wrap_pyfunction!(estimators, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("LyraError", m.py().get_type::<LyraError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
