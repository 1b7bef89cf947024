//! Python bindings. Structured results (reports, environments, bounds) are
//! returned as plain dicts and lists.

use errw_lab::environment::{self, EnvSampler};
use errw_lab::graph::families;
use errw_lab::{errw, estimator, moments, selftest, McmcConfig, PairChoice, Trajectory};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a serializable value to Python's `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_trajectories(steps: Vec<Vec<usize>>) -> PyResult<Vec<Trajectory>> {
    steps.into_iter().map(|s| Trajectory::new(s).map_err(err)).collect()
}

/// Finite simple connected graph; edges are stored as `(i, j)` with `i < j`
/// in lexicographic order, which fixes the order of every weight vector.
#[pyclass(name = "Graph", frozen, from_py_object)]
#[derive(Clone)]
struct PyGraph(errw_lab::Graph);

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        errw_lab::Graph::new(n, &edges).map(Self).map_err(err)
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        Self(families::path(n))
    }

    #[staticmethod]
    fn cycle(n: usize) -> Self {
        Self(families::cycle(n))
    }

    #[staticmethod]
    fn complete(n: usize) -> Self {
        Self(families::complete(n))
    }

    #[staticmethod]
    fn star(leaves: usize) -> Self {
        Self(families::star(leaves))
    }

    #[staticmethod]
    fn triangle() -> Self {
        Self(families::triangle())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        errw_lab::io::parse_graph(text, "<string>").map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        errw_lab::io::graph_to_json(&self.0)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        if v < self.0.n() {
            Ok(self.0.degree(v))
        } else {
            Err(PyValueError::new_err(format!("vertex {v} out of range")))
        }
    }

    fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.0.edge_index(i, j)
    }

    fn diameter(&self) -> usize {
        self.0.diameter()
    }

    fn is_tree(&self) -> bool {
        self.0.is_tree()
    }

    /// `ln Σ_T Π_{e∈T} w_e` over spanning trees.
    fn spanning_tree_log_sum(&self, w: Vec<f64>) -> PyResult<f64> {
        self.0.spanning_tree_log_sum(&w).map_err(err)
    }

    fn effective_resistance(&self, q: Vec<f64>, i: usize, j: usize) -> PyResult<f64> {
        self.0.effective_resistance(&q, i, j).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={:?})", self.0.n(), self.0.edges())
    }
}

/// Closed-form moments of `U_e = P_ij P_ji` under the mixing measure.
#[pyclass(name = "MomentOracle", frozen)]
struct PyMomentOracle(moments::MomentOracle);

#[pymethods]
impl PyMomentOracle {
    #[new]
    fn new(graph: &PyGraph, a: Vec<f64>, v0: usize) -> PyResult<Self> {
        moments::MomentOracle::new(&graph.0, &a, v0).map(Self).map_err(err)
    }

    fn expected_sqrt_u(&self, e: usize) -> PyResult<f64> {
        self.0.expected_sqrt_u(e).map_err(err)
    }

    fn expected_u(&self, e: usize) -> PyResult<f64> {
        self.0.expected_u(e).map_err(err)
    }

    fn expected_u_sq(&self, e: usize) -> PyResult<f64> {
        self.0.expected_u_sq(e).map_err(err)
    }

    fn expected_uu(&self, e: usize, f: usize) -> PyResult<f64> {
        self.0.expected_uu(e, f).map_err(err)
    }

    fn o(&self, v: usize) -> PyResult<f64> {
        if v < self.0.graph().n() {
            Ok(self.0.o(v))
        } else {
            Err(PyValueError::new_err(format!("vertex {v} out of range")))
        }
    }
}

/// `k` trajectories of `t` steps as vertex lists; reproducible from `seed`.
#[pyfunction]
fn simulate(graph: &PyGraph, a: Vec<f64>, v0: usize, t: usize, k: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    let batch = errw::simulate_batch(&graph.0, &a, v0, t, k, seed).map_err(err)?;
    Ok(batch.into_iter().map(Trajectory::into_steps).collect())
}

#[pyfunction]
fn log_likelihood(graph: &PyGraph, a: Vec<f64>, v0: usize, trajectories: Vec<Vec<usize>>) -> PyResult<f64> {
    errw::log_likelihood(&graph.0, &a, v0, &to_trajectories(trajectories)?).map_err(err)
}

/// Environments as dicts `{"v0", "beta", "phi", "q"}`. `sampler` is `"tree"`
/// (exact, trees only) or `"mcmc"`.
#[pyfunction]
#[pyo3(signature = (graph, a, v0, count, seed, sampler="mcmc", burn_in=500, thinning=10, step_size=0.5, chains=None))]
#[allow(clippy::too_many_arguments)]
fn sample_environments<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    a: Vec<f64>,
    v0: usize,
    count: usize,
    seed: u64,
    sampler: &str,
    burn_in: usize,
    thinning: usize,
    step_size: f64,
    chains: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let sampler = match sampler {
        "tree" => EnvSampler::Tree,
        "mcmc" => EnvSampler::Mcmc(McmcConfig { burn_in, thinning, step_size, chains }),
        other => return Err(PyValueError::new_err(format!("unknown sampler {other:?}"))),
    };
    let envs = py
        .detach(|| environment::sample_environments(&graph.0, &a, v0, count, &sampler, seed))
        .map_err(err)?;
    to_py(py, &envs)
}

#[pyfunction]
fn log_normalizer(graph: &PyGraph, a: Vec<f64>, v0: usize) -> PyResult<f64> {
    environment::log_normalizer_closed(&graph.0, &a, v0).map_err(err)
}

#[pyfunction]
fn kl_mixing(graph: &PyGraph, v0: usize, a: Vec<f64>, a_tilde: Vec<f64>) -> PyResult<f64> {
    moments::kl_mixing(&graph.0, v0, &a, &a_tilde).map_err(err)
}

/// Report dict `{"v0", "o_hat", "a_hat", "flags", "d"}`.
#[pyfunction]
#[pyo3(signature = (graph, trajectories, m, truth=None, pair_choice="canonical"))]
fn estimate<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    trajectories: Vec<Vec<usize>>,
    m: usize,
    truth: Option<Vec<f64>>,
    pair_choice: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let choice = match pair_choice {
        "canonical" => PairChoice::Canonical,
        "average" => PairChoice::Average,
        other => return Err(PyValueError::new_err(format!("unknown pair choice {other:?}"))),
    };
    let trajs = to_trajectories(trajectories)?;
    let report = py
        .detach(|| estimator::estimate(&graph.0, &trajs, m, choice, truth.as_deref()))
        .map_err(err)?;
    to_py(py, &report)
}

/// Weight recovery from noise-free moments; returns `â`.
#[pyfunction]
fn recover_exact(graph: &PyGraph, a: Vec<f64>, v0: usize) -> PyResult<Vec<f64>> {
    let oracle = moments::MomentOracle::new(&graph.0, &a, v0).map_err(err)?;
    let est = estimator::MomentEstimates::exact(&oracle).map_err(err)?;
    let rep = estimator::recover_weights(&graph.0, v0, &est, PairChoice::Canonical).map_err(err)?;
    Ok(rep.a_hat)
}

#[pyfunction]
fn divergence_d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    estimator::divergence_d(&a, &b).map_err(err)
}

#[pyfunction]
fn theoretical_bounds<'py>(
    py: Python<'py>,
    n: usize,
    diam: usize,
    a_lo: f64,
    a_hi: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &estimator::theoretical_bounds(n, diam, a_lo, a_hi, delta).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (n, diam, a_lo, a_hi, eps, delta, g2=1.0))]
#[allow(clippy::too_many_arguments)]
fn sample_size_plan<'py>(
    py: Python<'py>,
    n: usize,
    diam: usize,
    a_lo: f64,
    a_hi: f64,
    eps: f64,
    delta: f64,
    g2: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &estimator::sample_size_plan(n, diam, a_lo, a_hi, eps, delta, g2).map_err(err)?)
}

/// Reduced-scale self-test; list of `{"name", "passed", "detail"}`.
#[pyfunction]
fn run_selftest(py: Python<'_>, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let checks = py.detach(|| selftest::run(seed));
    to_py(py, &checks)
}

#[pymodule]
#[pyo3(name = "errw_lab")]
fn errw_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyMomentOracle>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(sample_environments, m)?)?;
    m.add_function(wrap_pyfunction!(log_normalizer, m)?)?;
    m.add_function(wrap_pyfunction!(kl_mixing, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(recover_exact, m)?)?;
    m.add_function(wrap_pyfunction!(divergence_d, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
