//! Python bindings for `levysde`.

use std::path::PathBuf;

use levysde::convergence::{self, ErrorMode};
use levysde::experiment::{self, ExperimentConfig, RunOptions};
use levysde::measure::{self, StationaryReference};
use levysde::model::builtin;
use levysde::noise;
use levysde::sim::{self, SimConfig};
use levysde::{Error, ImplicitStepConfig, SdeProblem, SeedPolicy, StreamTag};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(levysde_py, LevySdeError, PyException);
create_exception!(levysde_py, ConfigError, LevySdeError);
create_exception!(levysde_py, PreconditionError, LevySdeError);
create_exception!(levysde_py, StepFailureError, LevySdeError);

fn to_py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) => ConfigError::new_err(msg),
        Error::Precondition(_) => PreconditionError::new_err(msg),
        Error::StepFailure { .. } => StepFailureError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for levysde::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn to_python<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| LevySdeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn solver_config(
    abs_tol: Option<f64>,
    max_newton_iters: Option<u32>,
    max_bisection_iters: Option<u32>,
) -> ImplicitStepConfig {
    let d = ImplicitStepConfig::default();
    ImplicitStepConfig {
        abs_tol: abs_tol.unwrap_or(d.abs_tol),
        max_newton_iters: max_newton_iters.unwrap_or(d.max_newton_iters),
        max_bisection_iters: max_bisection_iters.unwrap_or(d.max_bisection_iters),
        damping: d.damping,
    }
}

/// An SDE problem: coefficients, noise, initial value and horizon.
#[pyclass(name = "Problem", module = "levysde_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: SdeProblem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: builtin::problem(name).py()?,
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.inner.x0.clone()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn has_diffusion(&self) -> bool {
        self.inner.has_diffusion()
    }

    #[getter]
    fn heavy_tailed(&self) -> bool {
        self.inner.noise.is_heavy_tailed()
    }

    fn with_x0(&self, x0: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_x0(x0).py()?,
        })
    }

    fn with_horizon(&self, horizon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_horizon(horizon).py()?,
        })
    }

    fn drift(&self, t: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.dim() {
            return Err(ConfigError::new_err("state has the wrong dimension"));
        }
        let mut out = vec![0.0; x.len()];
        self.inner.coeffs.drift(t, &x, &mut out);
        Ok(out)
    }

    /// Strong order predicted from the assumption constants.
    fn predicted_order(&self) -> f64 {
        convergence::predicted_order(
            &self.inner.constants,
            &self.inner.noise,
            self.inner.has_diffusion(),
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(id={:?}, dim={}, horizon={})",
            self.inner.id,
            self.inner.dim(),
            self.inner.horizon
        )
    }
}

/// Sorted sample of a scalar law at a fixed time.
#[pyclass(
    name = "EmpiricalMeasure",
    module = "levysde_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyMeasure {
    inner: measure::EmpiricalMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    #[pyo3(signature = (values, time = f64::INFINITY))]
    fn new(values: Vec<f64>, time: f64) -> PyResult<Self> {
        Ok(Self {
            inner: measure::EmpiricalMeasure::new(values, time).py()?,
        })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::new_err("quantile level must lie in [0, 1]"));
        }
        Ok(self.inner.quantile(p))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "EmpiricalMeasure(n={}, time={})",
            self.inner.len(),
            self.inner.time
        )
    }
}

/// Strong error table over a list of step sizes.
#[pyclass(name = "ErrorTable", module = "levysde_py", frozen)]
struct PyErrorTable {
    inner: convergence::ErrorTable,
}

#[pymethods]
impl PyErrorTable {
    #[getter]
    fn dt(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.dt).collect()
    }

    #[getter]
    fn rmse(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.rmse).collect()
    }

    #[getter]
    fn mse(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.mse).collect()
    }

    #[getter]
    fn stderr(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.stderr).collect()
    }

    #[getter]
    fn reference_dt(&self) -> f64 {
        self.inner.reference_dt
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Least-squares order fit as a dict.
    fn fit_order<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &convergence::fit_order(&self.inner).py()?)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner)
    }
}

/// Solve `Y = c + dt f(t_next, Y)`; returns the root and solver diagnostics.
#[pyfunction]
#[pyo3(signature = (problem, t_next, c, dt, abs_tol = None, max_newton_iters = None, max_bisection_iters = None))]
fn solve_implicit_step<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    t_next: f64,
    c: Vec<f64>,
    dt: f64,
    abs_tol: Option<f64>,
    max_newton_iters: Option<u32>,
    max_bisection_iters: Option<u32>,
) -> PyResult<(Vec<f64>, Bound<'py, PyAny>)> {
    let cfg = solver_config(abs_tol, max_newton_iters, max_bisection_iters);
    let (y, diag) = levysde::solve_implicit_step(&problem.inner, t_next, &c, dt, &cfg).py()?;
    Ok((y, to_python(py, &diag)?))
}

/// One trajectory on the grid `t_i = i dt`, as a list of states.
#[pyfunction]
#[pyo3(signature = (problem, dt, seed = 0, path_index = 0))]
fn simulate_path(
    py: Python<'_>,
    problem: &PyProblem,
    dt: f64,
    seed: u64,
    path_index: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let problem = &problem.inner;
    let path = py
        .detach(|| {
            let tape = sim::make_tape(
                problem,
                dt,
                SeedPolicy::new(seed, path_index, StreamTag::Brownian),
            )?;
            let inc = sim::coarsen(&tape, dt)?;
            sim::simulate_path(problem, dt, &inc, &SimConfig::default())
        })
        .py()?;
    Ok((0..=path.steps()).map(|i| path.state(i).to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (problem, dt_list, reference_dt, n_paths, seed = 0, max_over_grid = false))]
fn strong_error_table(
    py: Python<'_>,
    problem: &PyProblem,
    dt_list: Vec<f64>,
    reference_dt: f64,
    n_paths: usize,
    seed: u64,
    max_over_grid: bool,
) -> PyResult<PyErrorTable> {
    let mode = if max_over_grid {
        ErrorMode::MaxOverGrid
    } else {
        ErrorMode::Terminal
    };
    let problem = &problem.inner;
    let inner = py
        .detach(|| {
            convergence::strong_error_table(
                problem,
                &dt_list,
                reference_dt,
                n_paths,
                seed,
                &SimConfig::default(),
                mode,
            )
        })
        .py()?;
    Ok(PyErrorTable { inner })
}

/// Ensemble snapshots of a scalar problem at each checkpoint.
#[pyfunction]
#[pyo3(signature = (problem, dt, n_paths, checkpoints, seed = 0))]
fn evolve_empirical_law(
    py: Python<'_>,
    problem: &PyProblem,
    dt: f64,
    n_paths: usize,
    checkpoints: Vec<f64>,
    seed: u64,
) -> PyResult<Vec<PyMeasure>> {
    let problem = &problem.inner;
    let laws = py
        .detach(|| {
            measure::evolve_empirical_law(
                problem,
                dt,
                n_paths,
                &checkpoints,
                seed,
                &SimConfig::default(),
            )
        })
        .py()?;
    Ok(laws.into_iter().map(|inner| PyMeasure { inner }).collect())
}

#[pyfunction]
fn wasserstein_k(a: &PyMeasure, b: &PyMeasure, k: f64) -> PyResult<f64> {
    measure::wasserstein_k(&a.inner, &b.inner, k).py()
}

/// Two-sample KS statistic and p-value of `sample` against `reference`.
#[pyfunction]
fn ks_two_sample(sample: &PyMeasure, reference: &PyMeasure) -> PyResult<(f64, f64)> {
    let r = measure::ks_statistic(
        &sample.inner,
        &StationaryReference::EmpiricalSnapshot(reference.inner.clone()),
    )
    .py()?;
    Ok((r.statistic, r.p_value))
}

/// KS test against a symmetric alpha-stable law with the given scale.
#[pyfunction]
#[pyo3(signature = (sample, alpha, scale, seed = 0))]
fn ks_stable(sample: &PyMeasure, alpha: f64, scale: f64, seed: u64) -> PyResult<(f64, f64)> {
    let reference = StationaryReference::stable(alpha, scale, seed).py()?;
    let r = measure::ks_statistic(&sample.inner, &reference).py()?;
    Ok((r.statistic, r.p_value))
}

#[pyfunction]
#[pyo3(signature = (alpha, scale, dt, n, seed = 0))]
fn sample_alpha_stable(alpha: f64, scale: f64, dt: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    noise::sample_alpha_stable(
        alpha,
        scale,
        dt,
        n,
        SeedPolicy::new(seed, 0, StreamTag::Levy),
    )
    .py()
}

#[pyfunction]
#[pyo3(signature = (alpha, lam, scale, dt, n, seed = 0))]
fn sample_tempered_stable(
    alpha: f64,
    lam: f64,
    scale: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    Ok(noise::sample_tempered_stable(
        alpha,
        lam,
        scale,
        dt,
        n,
        SeedPolicy::new(seed, 0, StreamTag::Levy),
    )
    .py()?
    .values)
}

#[pyfunction]
fn list_builtin(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_python(py, &experiment::list_builtin())
}

/// JSON text of a built-in experiment config.
#[pyfunction]
fn builtin_config(name: &str) -> PyResult<String> {
    Ok(experiment::builtin_config(name).py()?.to_json())
}

/// Run an experiment given a built-in name, a config path or JSON text.
#[pyfunction]
#[pyo3(signature = (config, n_paths = None, seed = None, out = None, workers = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    n_paths: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = if config.trim_start().starts_with('{') {
        ExperimentConfig::from_json(config)
    } else if std::path::Path::new(config).is_file() {
        ExperimentConfig::load(std::path::Path::new(config))
    } else {
        experiment::builtin_config(config)
    }
    .py()?;
    let options = RunOptions {
        n_paths,
        master_seed: seed,
        output_root: out,
        workers,
    };
    let summary = py.detach(|| experiment::run(&cfg, &options)).py()?;
    to_python(py, &summary)
}

#[pymodule]
fn levysde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("LevySdeError", py.get_type::<LevySdeError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("PreconditionError", py.get_type::<PreconditionError>())?;
    m.add("StepFailureError", py.get_type::<StepFailureError>())?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyErrorTable>()?;
    m.add_function(wrap_pyfunction!(solve_implicit_step, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(strong_error_table, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_empirical_law, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_k, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ks_stable, m)?)?;
    m.add_function(wrap_pyfunction!(sample_alpha_stable, m)?)?;
    m.add_function(wrap_pyfunction!(sample_tempered_stable, m)?)?;
    m.add_function(wrap_pyfunction!(list_builtin, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
