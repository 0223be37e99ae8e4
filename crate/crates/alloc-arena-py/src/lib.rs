//! Python bindings for the allocation framework: the coverage math, the
//! one-shot solvers, the Wilcoxon test, and the full experiment harness.
//!
//! Build as a cdylib and import as `alloc_arena_py`; see
//! `python/smoke_test.py` at the repository root for a usage example.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use alloc_arena::config::ExperimentConfig;
use alloc_arena::coverage::{Allocation, Tau};
use alloc_arena::env::Environment;
use alloc_arena::error::ArenaError;
use alloc_arena::harness;
use alloc_arena::lagrangian::LagrangianConfig;
use alloc_arena::stats::{self, ZeroHandling};

fn py_err(e: ArenaError) -> PyErr {
    match e {
        ArenaError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn tau_from(v: u8) -> PyResult<Tau> {
    Tau::from_value(v).map_err(py_err)
}

/// Binomial miss tail g(n, q) = P(J < tau) for J ~ Binomial(n, 1-q),
/// extended continuously in n.
#[pyfunction]
fn g_tail(n: f64, q: f64, tau: u8) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(PyValueError::new_err(format!("q = {q} outside [0, 1]")));
    }
    if n <= 0.0 {
        return Err(PyValueError::new_err(format!("n = {n} must be positive")));
    }
    Ok(alloc_arena::coverage::g_tail(n, q, tau_from(tau)?))
}

/// Stationarity function f(n, q, lambda) = dg/dn - lambda.
#[pyfunction]
fn f_derivative(n: f64, q: f64, lam: f64, tau: u8) -> PyResult<f64> {
    alloc_arena::coverage::f_derivative(n, q, lam, tau_from(tau)?).map_err(py_err)
}

/// Closed-form stationary allocation size for tau = 1.
#[pyfunction]
fn closed_form_n(q: f64, lam: f64) -> PyResult<f64> {
    alloc_arena::lagrangian::closed_form_n(q, lam).map_err(py_err)
}

/// Expected coverage sum(1 - (1 - p_i)^{n_i}).
#[pyfunction]
fn expected_coverage(p: Vec<f64>, counts: Vec<u32>) -> PyResult<f64> {
    let alloc = Allocation::new(counts).map_err(py_err)?;
    alloc_arena::coverage::expected_coverage(&p, &alloc).map_err(py_err)
}

/// Exact greedy maximizer of expected coverage.
#[pyfunction]
fn greedy_allocation(p: Vec<f64>, budget: u32) -> PyResult<Vec<u32>> {
    alloc_arena::coverage::greedy_optimal_allocation(&p, budget)
        .map(Allocation::into_counts)
        .map_err(py_err)
}

/// Lagrangian grid-search allocation from complement probabilities
/// (each strictly inside (0, 1)).
#[pyfunction]
fn lagrangian_allocation(q: Vec<f64>, budget: u32, tau: u8) -> PyResult<Vec<u32>> {
    let cfg = LagrangianConfig::for_types(q.len());
    alloc_arena::lagrangian::solve_allocation(&q, budget, tau_from(tau)?, &cfg)
        .map(Allocation::into_counts)
        .map_err(py_err)
}

/// Two-sided Wilcoxon signed-rank test on paired series. Returns a dict
/// with keys `w`, `n_effective`, `z`, `p_value`.
#[pyfunction]
#[pyo3(signature = (x, y, pratt = false))]
fn wilcoxon<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    y: Vec<f64>,
    pratt: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let zeros = if pratt {
        ZeroHandling::Pratt
    } else {
        ZeroHandling::Discard
    };
    let r = stats::wilcoxon_signed_rank_with(&x, &y, zeros).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("w", r.w)?;
    d.set_item("n_effective", r.n_effective)?;
    d.set_item("z", r.z)?;
    d.set_item("p_value", r.p_value)?;
    Ok(d)
}

/// The fully resolved default experiment configuration in the flat
/// `key = value` format accepted by `run_experiment`.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_flat_text()
}

/// One environment realization: the true detection probabilities `p_i(t)`
/// as a `horizon x n_types` list of lists, built from a flat config text
/// (only the environment keys matter).
#[pyfunction]
#[pyo3(signature = (config_text = ""))]
fn environment_trajectory(config_text: &str) -> PyResult<Vec<Vec<f64>>> {
    let cfg = ExperimentConfig::from_flat_text(config_text).map_err(py_err)?;
    let mut env = Environment::new(cfg.env).map_err(py_err)?;
    let horizon = env.config().horizon;
    let mut rows = Vec::with_capacity(horizon);
    for t in 0..horizon {
        rows.push(env.state().p());
        if t + 1 < horizon {
            env.advance().map_err(py_err)?;
        }
    }
    Ok(rows)
}

/// Runs a full experiment from a flat config text. Writes the usual output
/// files when `output_dir` is given. Returns a summary dict.
#[pyfunction]
#[pyo3(signature = (config_text = "", seed = None, output_dir = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_text: &str,
    seed: Option<u64>,
    output_dir: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ExperimentConfig::from_flat_text(config_text).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.env.seed = s;
    }
    if let Some(dir) = &output_dir {
        cfg.output_dir = dir.into();
    }
    cfg.validate().map_err(py_err)?;
    let output = harness::run_experiment(&cfg).map_err(py_err)?;
    if output_dir.is_some() {
        harness::write_outputs(&cfg, &output).map_err(py_err)?;
    }

    let summary = PyDict::new(py);
    let coverage = PyDict::new(py);
    let mse = PyDict::new(py);
    for s in &output.summaries {
        coverage.set_item(s.strategy.name(), s.mean_coverage)?;
        mse.set_item(s.strategy.name(), s.mean_mse)?;
    }
    summary.set_item("mean_coverage", coverage)?;
    summary.set_item("mean_mse", mse)?;
    summary.set_item("n_records", output.records.len())?;
    summary.set_item("seed", cfg.env.seed)?;
    match &output.wilcoxon {
        Some(w) => {
            let d = PyDict::new(py);
            d.set_item("w", w.w)?;
            d.set_item("n_effective", w.n_effective)?;
            d.set_item("z", w.z)?;
            d.set_item("p_value", w.p_value)?;
            summary.set_item("wilcoxon_rolling_vs_rl", d)?;
        }
        None => summary.set_item("wilcoxon_rolling_vs_rl", py.None())?,
    }
    Ok(summary)
}

#[pymodule]
fn alloc_arena_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(g_tail, m)?)?;
    m.add_function(wrap_pyfunction!(f_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_n, m)?)?;
    m.add_function(wrap_pyfunction!(expected_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(lagrangian_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(environment_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
