//! Python bindings. Structured results cross the boundary as plain Python
//! objects decoded from JSON, so they mirror the Rust serde layout.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use drcc_cbm::baselines::{plan, BaselineKind};
use drcc_cbm::degradation::{self, ComponentTypeParams, DegradationSignal};
use drcc_cbm::dro::{self, AmbiguityConfig, MaintenanceCosts};
use drcc_cbm::harness::{self, EpisodeConfig};
use drcc_cbm::milp::{backend, SolveOptions};
use drcc_cbm::model::{verify_solution, ProblemInstance, Z2Mode};
use drcc_cbm::prognostics::{self, EmpiricalRld};
use drcc_cbm::{presets, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Dimension(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> PyResult<T> {
    serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Ground-truth degradation model of one spare type.
#[pyclass(name = "ComponentType", from_py_object)]
#[derive(Clone)]
struct PyComponentType(ComponentTypeParams);

#[pymethods]
impl PyComponentType {
    /// Calibrated wind-turbine type 0, 1 or 2.
    #[staticmethod]
    fn preset(l: usize) -> PyResult<Self> {
        presets::component_types()
            .into_iter()
            .nth(l)
            .map(PyComponentType)
            .ok_or_else(|| PyValueError::new_err(format!("no preset type {l}")))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let p: ComponentTypeParams = from_json(s)?;
        p.validate().map_err(err)?;
        Ok(PyComponentType(p))
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }

    fn simulate(&self, seed: u64) -> PyResult<PySignal> {
        degradation::simulate_signal(&self.0, seed).map(PySignal).map_err(err)
    }

    fn dataset(&self, n: usize, seed: u64) -> PyResult<Vec<PySignal>> {
        Ok(degradation::generate_dataset(&self.0, n, seed)
            .map_err(err)?
            .into_iter()
            .map(PySignal)
            .collect())
    }

    fn mean_lifetime(&self, n: usize, seed: u64) -> PyResult<f64> {
        degradation::mean_lifetime(&self.0, n, seed).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ComponentType(type_id={}, log_beta_mean={:.4})", self.0.type_id, self.0.log_beta_prior.0)
    }
}

/// A complete simulated degradation signal.
#[pyclass(name = "Signal", from_py_object)]
#[derive(Clone)]
struct PySignal(DegradationSignal);

#[pymethods]
impl PySignal {
    #[getter]
    fn samples(&self) -> Vec<(f64, f64)> {
        self.0.samples.clone()
    }

    #[getter]
    fn failure_time(&self) -> f64 {
        self.0.failure_time
    }

    #[getter]
    fn type_id(&self) -> usize {
        self.0.type_id
    }

    fn __len__(&self) -> usize {
        self.0.samples.len()
    }
}

/// Priors fitted from complete training signals of one type.
#[pyclass(name = "Priors")]
struct PyPriors(prognostics::Priors);

#[pymethods]
impl PyPriors {
    #[staticmethod]
    fn fit(training: Vec<PySignal>) -> PyResult<Self> {
        let sigs: Vec<DegradationSignal> = training.into_iter().map(|s| s.0).collect();
        prognostics::fit_priors(&sigs).map(PyPriors).map_err(err)
    }

    /// RLD of `signal` observed up to `age`.
    #[pyo3(signature = (signal, age, n = prognostics::DEFAULT_RLD_SAMPLES, seed = 0))]
    fn predict_rld(&self, signal: &PySignal, age: f64, n: usize, seed: u64) -> PyResult<PyRld> {
        let obs = degradation::truncate_at_age(&signal.0, age).map_err(err)?;
        prognostics::predict_rld(&self.0, &obs, n, seed).map(PyRld).map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

/// Empirical remaining-life distribution.
#[pyclass(name = "Rld", from_py_object)]
#[derive(Clone)]
struct PyRld(EmpiricalRld);

#[pymethods]
impl PyRld {
    #[new]
    fn new(samples: Vec<f64>, tau_max: f64) -> PyResult<Self> {
        EmpiricalRld::from_samples(samples, tau_max).map(PyRld).map_err(err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.0.samples.clone()
    }

    #[getter]
    fn sigma_hat(&self) -> f64 {
        self.0.sigma_hat
    }

    #[getter]
    fn tau_max(&self) -> f64 {
        self.0.tau_max
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Maintenance costs of one component.
#[pyclass(name = "Costs", from_py_object)]
#[derive(Clone, Copy)]
struct PyCosts(MaintenanceCosts);

#[pymethods]
impl PyCosts {
    #[new]
    #[pyo3(signature = (c_pr = 1.3, v_pr = 0.13, c_co = 7.8, v_co = 0.78))]
    fn new(c_pr: f64, v_pr: f64, c_co: f64, v_co: f64) -> Self {
        PyCosts(MaintenanceCosts { c_pr, v_pr, c_co, v_co })
    }
}

/// Problem instance: topology, costs and risk parameters.
#[pyclass(name = "Instance", from_py_object)]
#[derive(Clone)]
struct PyInstance(ProblemInstance);

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn wind_farm(turbines: usize) -> Self {
        PyInstance(presets::wind_farm(turbines))
    }

    /// Small synthetic instance with matching RLDs.
    #[staticmethod]
    #[pyo3(signature = (machines = 2, n = 100, seed = 0))]
    fn regression(machines: usize, n: usize, seed: u64) -> PyResult<(Self, Vec<PyRld>)> {
        let (inst, rlds) = presets::regression_instance(machines, n, seed).map_err(err)?;
        Ok((PyInstance(inst), rlds.into_iter().map(PyRld).collect()))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        ProblemInstance::from_json(s).map(PyInstance).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.0.n_components()
    }

    #[getter]
    fn t_max(&self) -> usize {
        self.0.t_max
    }
}

#[pyfunction]
fn alpha(omega: f64, t: f64, costs: PyCosts) -> f64 {
    dro::alpha(omega, t, &costs.0)
}

/// Worst-case expected repair cost at epoch `t`; `delta` is the absolute
/// radius, not the normalised one.
#[pyfunction]
fn psi(rld: &PyRld, delta: f64, t: usize, costs: PyCosts) -> f64 {
    dro::psi(&rld.0, delta, t, &costs.0)
}

#[pyfunction]
fn u(rld: &PyRld, delta: f64, t: usize, rho: f64, eps: f64) -> bool {
    dro::u(&rld.0, delta, t, rho, eps)
}

#[pyfunction]
fn t_star(rld: &PyRld, delta: f64, rho: f64, eps: f64, t_max: usize) -> usize {
    dro::t_star(&rld.0, delta, rho, eps, t_max)
}

#[pyfunction]
fn p_bar(rld: &PyRld, delta: f64, t: usize) -> f64 {
    dro::p_bar(&rld.0, delta, t)
}

/// `P(at most m successes)` for independent Bernoulli trials `ps`.
#[pyfunction]
fn pbinom_cdf(ps: Vec<f64>, m: usize) -> f64 {
    dro::pbinom_cdf(&ps, m)
}

/// Precomputed `psi`, `t_star` and `p_bar` for every component.
#[pyfunction]
#[pyo3(signature = (instance, rlds, delta = 0.0))]
fn precompute(py: Python<'_>, instance: &PyInstance, rlds: Vec<PyRld>, delta: f64) -> PyResult<Py<PyAny>> {
    let rlds: Vec<EmpiricalRld> = rlds.into_iter().map(|r| r.0).collect();
    let inst = &instance.0;
    let p = dro::precompute(
        &rlds,
        &inst.component_costs(),
        AmbiguityConfig::new(delta).map_err(err)?,
        inst.rho,
        inst.eps,
        inst.t_max,
    )
    .map_err(err)?;
    to_py(py, &p)
}

fn z2_mode(z2: &str, samples: usize, seed: u64) -> PyResult<Z2Mode> {
    match z2 {
        "exact" => Ok(Z2Mode::Exact),
        "off" => Ok(Z2Mode::Off),
        "sample" => Ok(Z2Mode::SampleBased { samples, seed }),
        other => Err(PyValueError::new_err(format!("z2 must be exact, sample or off, got `{other}`"))),
    }
}

/// Solves a policy and verifies the schedule. Returns a dict with the plan
/// and the verification report.
#[pyfunction]
#[pyo3(signature = (instance, rlds, policy = "drcc:0.1", z2 = "exact", samples = 500, seed = 0, time_limit = 600.0, gap = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    instance: &PyInstance,
    rlds: Vec<PyRld>,
    policy: &str,
    z2: &str,
    samples: usize,
    seed: u64,
    time_limit: f64,
    gap: f64,
) -> PyResult<Py<PyAny>> {
    let kind: BaselineKind = policy.parse().map_err(err)?;
    let z2 = z2_mode(z2, samples, seed)?;
    let rlds: Vec<EmpiricalRld> = rlds.into_iter().map(|r| r.0).collect();
    let inst = instance.0.clone();
    let opts = SolveOptions {
        time_limit: std::time::Duration::from_secs_f64(time_limit),
        mip_gap: gap,
        seed,
        threads: 1,
    };
    let (p, rep) = py
        .detach(|| -> drcc_cbm::Result<_> {
            let solver = backend("highs")?;
            let p = plan(kind, &inst, &rlds, z2, solver.as_ref(), &opts)?;
            let rep = verify_solution(&inst, &p.params, &p.solution);
            Ok((p, rep))
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "policy": kind.to_string(),
        "objective": p.objective(),
        "plan": p,
        "verification": rep,
    });
    to_py(py, &out)
}

/// One closed-loop episode on the calibrated wind farm. Returns a dict with
/// the cost ledger, KPIs, repairs and failures.
#[pyfunction]
#[pyo3(signature = (policy = "drcc:0.1", training = 5, seed = 1, turbines = 5, sim_days = 200))]
fn run_episode(py: Python<'_>, policy: &str, training: usize, seed: u64, turbines: usize, sim_days: usize) -> PyResult<Py<PyAny>> {
    let kind: BaselineKind = policy.parse().map_err(err)?;
    let ep = py
        .detach(|| -> drcc_cbm::Result<_> {
            let types = presets::component_types();
            let priors = harness::training_priors(&types, training, seed)?;
            let cfg = EpisodeConfig::new(presets::wind_farm(turbines), types, kind, sim_days);
            harness::run_episode(&cfg, &priors, seed)
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "ledger": ep.ledger,
        "kpis": ep.kpis,
        "solves": ep.solves,
        "repairs": ep.repairs,
        "failures": ep.failures,
        "integrity_ok": ep.integrity_ok(),
    });
    to_py(py, &out)
}

#[pymodule]
#[pyo3(name = "drcc_cbm")]
fn drcc_cbm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyComponentType>()?;
    m.add_class::<PySignal>()?;
    m.add_class::<PyPriors>()?;
    m.add_class::<PyRld>()?;
    m.add_class::<PyCosts>()?;
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(alpha, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(u, m)?)?;
    m.add_function(wrap_pyfunction!(t_star, m)?)?;
    m.add_function(wrap_pyfunction!(p_bar, m)?)?;
    m.add_function(wrap_pyfunction!(pbinom_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(precompute, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    Ok(())
}
