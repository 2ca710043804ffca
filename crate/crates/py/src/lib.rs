//! Python bindings. Results built from serializable engine types are
//! returned as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use engine::rate::{self, ClosedFormOptions, RateMethod};
use engine::validation::ValidationOptions;
use engine::{scaling, scheduler, validation};

fn err(e: engine::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn workers_or_default(workers: Option<usize>) -> PyResult<usize> {
    match workers {
        Some(w) => Ok(w),
        None => scheduler::default_workers().map_err(err),
    }
}

/// Validated network configuration: M antennas and K0 users.
#[pyclass(frozen, skip_from_py_object, module = "cdfsched")]
#[derive(Clone)]
struct Scenario {
    inner: engine::Scenario,
}

#[pymethods]
impl Scenario {
    /// `users` is a list of `(rho_serving, [rho_interferers...])`.
    #[new]
    fn new(num_antennas: usize, users: Vec<(f64, Vec<f64>)>) -> PyResult<Self> {
        engine::Scenario::from_profiles(num_antennas, users)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        engine::Scenario::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        engine::Scenario::from_json_file(path)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.num_antennas
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    /// `[(rho_serving, [rho_interferers...]), ...]` in user order.
    #[getter]
    fn users(&self) -> Vec<(f64, Vec<f64>)> {
        self.inner
            .users
            .iter()
            .map(|u| (u.rho_serving, u.rho_interferers.clone()))
            .collect()
    }

    fn distribution(&self, user: usize) -> PyResult<SinrDistribution> {
        let p = self
            .inner
            .users
            .get(user)
            .ok_or_else(|| PyValueError::new_err(format!("user {user} out of range")))?;
        Ok(SinrDistribution {
            inner: engine::SinrDistribution::from_profile(self.inner.num_antennas, p),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(num_antennas={}, num_users={})",
            self.inner.num_antennas,
            self.inner.num_users()
        )
    }
}

/// Exact per-beam SINR law of one user.
#[pyclass(frozen, skip_from_py_object, module = "cdfsched")]
#[derive(Clone)]
struct SinrDistribution {
    inner: engine::SinrDistribution,
}

#[pymethods]
impl SinrDistribution {
    #[new]
    #[pyo3(signature = (num_antennas, rho_serving, rho_interferers = Vec::new()))]
    fn new(num_antennas: usize, rho_serving: f64, rho_interferers: Vec<f64>) -> PyResult<Self> {
        engine::SinrDistribution::new(num_antennas, rho_serving, rho_interferers)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.num_antennas()
    }

    #[getter]
    fn rho_serving(&self) -> f64 {
        self.inner.rho_serving()
    }

    #[getter]
    fn rho_interferers(&self) -> Vec<f64> {
        self.inner.rho_interferers().to_vec()
    }

    #[getter]
    fn tail_order(&self) -> u32 {
        self.inner.tail_order()
    }

    fn poles<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.poles())
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(err)
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.inner.pdf(x).map_err(err)
    }

    fn log_tail(&self, x: f64) -> f64 {
        self.inner.log_tail(x)
    }

    fn mgf_interference(&self, tau: f64) -> PyResult<f64> {
        self.inner.mgf_interference(tau).map_err(err)
    }

    /// `(F_lb, F_ub)` with `F_lb <= F <= F_ub`.
    fn cdf_bounds(&self, x: f64) -> PyResult<(f64, f64)> {
        self.inner.cdf_bounds(x).map_err(err)
    }

    fn growth_function(&self, x: f64) -> PyResult<f64> {
        self.inner.growth_function(x).map_err(err)
    }

    fn gumbel_criterion(&self, x: f64) -> PyResult<f64> {
        self.inner.gumbel_criterion(x).map_err(err)
    }

    fn von_mises_ratio(&self, x: f64) -> PyResult<f64> {
        self.inner.von_mises_ratio(x).map_err(err)
    }

    fn solve_level<'py>(&self, py: Python<'py>, k0: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.solve_level(k0).map_err(err)?)
    }

    fn asymptotic_level<'py>(&self, py: Python<'py>, k0: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.asymptotic_level(k0).map_err(err)?)
    }

    fn concentration_window(&self, k0: f64) -> PyResult<(f64, f64)> {
        let w = scaling::concentration_window(&self.inner, k0).map_err(err)?;
        Ok((w.lo, w.hi))
    }

    fn gumbel_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = scaling::gumbel_attraction_check(&self.inner);
        let d = to_py(py, &r)?;
        d.set_item("passes", r.passes())?;
        Ok(d)
    }

    #[pyo3(signature = (k0, cap = rate::DEFAULT_CLOSED_FORM_CAP))]
    fn closed_form_rate(&self, py: Python<'_>, k0: u64, cap: u64) -> PyResult<f64> {
        let d = self.inner.clone();
        py.detach(move || rate::closed_form_rate(&d, k0, ClosedFormOptions { cap }))
            .map_err(err)
    }

    fn quadrature_rate(&self, py: Python<'_>, k0: u64) -> PyResult<f64> {
        let d = self.inner.clone();
        py.detach(move || rate::quadrature_rate(&d, k0))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SinrDistribution(num_antennas={}, rho_serving={}, rho_interferers={:?})",
            self.inner.num_antennas(),
            self.inner.rho_serving(),
            self.inner.rho_interferers()
        )
    }
}

/// Individual sum rate of `user` by `method` ("closed", "quadrature" or
/// "both").
#[pyfunction]
#[pyo3(signature = (scenario, user, method = "both"))]
fn rate_report<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    user: usize,
    method: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let m = match method {
        "closed" => RateMethod::Closed,
        "quadrature" => RateMethod::Quadrature,
        "both" => RateMethod::Both,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let s = scenario.inner.clone();
    let r = py
        .detach(move || rate::rate_report(&s, user, m, ClosedFormOptions::default()))
        .map_err(err)?;
    to_py(py, &r)
}

/// Monte Carlo run; the report is identical for every worker count.
#[pyfunction]
#[pyo3(signature = (scenario, trials, seed = 0, workers = None))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let w = workers_or_default(workers)?;
    let s = scenario.inner.clone();
    let r = py
        .detach(move || scheduler::simulate_with_workers(&s, trials, seed, w))
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn log_spaced_grid(lo: u64, hi: u64, count: usize) -> PyResult<Vec<u64>> {
    scaling::log_spaced_grid(lo, hi, count).map_err(err)
}

/// Scaling sweep of `user` over `grid`; `mc_trials` adds the in-window
/// frequency for grid points up to 1e4.
#[pyfunction]
#[pyo3(signature = (scenario, user, grid, mc_trials = None, seed = 0, workers = None))]
fn scaling_sweep<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    user: usize,
    grid: Vec<u64>,
    mc_trials: Option<u64>,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let s = scenario.inner.clone();
    let sweep = match mc_trials {
        Some(t) => {
            let w = workers_or_default(workers)?;
            py.detach(move || scaling::scaling_sweep_with_mc(&s, user, &grid, t, seed, w))
        }
        None => py.detach(move || scaling::scaling_ratio_sweep(&s, user, &grid)),
    }
    .map_err(err)?;
    to_py(py, &sweep)
}

/// Cross-validation suite; see the `validate` CLI command.
#[pyfunction]
#[pyo3(signature = (scenario, trials, seed = 0, workers = None, corrupt_rho = None))]
fn validate<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
    corrupt_rho: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = ValidationOptions {
        trials,
        seed,
        workers: workers_or_default(workers)?,
        corrupt_rho,
    };
    let s = scenario.inner.clone();
    let r = py
        .detach(move || validation::validate(&s, &opts))
        .map_err(err)?;
    let d = to_py(py, &r)?;
    d.set_item("passes", r.passes())?;
    Ok(d)
}

#[pyfunction]
fn exp_int_e1(x: f64) -> PyResult<f64> {
    rate::exp_int_e1(x).map_err(err)
}

/// `int_0^inf e^(-alpha x) / ((1 + x) (beta + x)^gamma) dx`.
#[pyfunction]
fn integral_i1(alpha: f64, beta: f64, gamma: u32) -> PyResult<f64> {
    rate::integral_i1(alpha, beta, gamma).map_err(err)
}

/// `int_0^inf e^(-alpha x) / (beta + x)^gamma dx`.
#[pyfunction]
fn integral_i2(alpha: f64, beta: f64, gamma: u32) -> PyResult<f64> {
    rate::integral_i2(alpha, beta, gamma).map_err(err)
}

#[pymodule]
#[pyo3(name = "cdfsched")]
fn cdfsched_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<SinrDistribution>()?;
    m.add_function(wrap_pyfunction!(rate_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(log_spaced_grid, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(exp_int_e1, m)?)?;
    m.add_function(wrap_pyfunction!(integral_i1, m)?)?;
    m.add_function(wrap_pyfunction!(integral_i2, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("MIN_VALIDATION_TRIALS", validation::MIN_TRIALS)?;
    Ok(())
}
