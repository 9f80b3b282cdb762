//! Python bindings. Model and prescription arguments are JSON text in the
//! same format the command-line tool reads; results come back as JSON text.

use dp::error::Error;
use dp::oracle::{build_joint, exhaustive_min, OracleOptions};
use dp::problem::ProblemFile;
use dp::quantizer::{build_lattice, quantize as nearest, tv_distance};
use dp::sim::{rollout, RolloutConfig};
use dp::solver::{extract_control_strategy, solve_exact, solve_pbp_approx, solve_pbp_exact, Psi2};
use dp::{Rational, TeamModel};
use dp::info::InfoStructure;
use pyo3::exceptions::{PyMemoryError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ResourceLimit(_) => PyMemoryError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn text(v: Value) -> String {
    v.to_string()
}

fn load(model_json: &str, delay: Option<usize>) -> PyResult<(TeamModel, InfoStructure)> {
    let file = ProblemFile::parse(model_json).map_err(py_err)?;
    let model = file.team_model().map_err(py_err)?;
    let info = file.info(&model, delay).map_err(py_err)?;
    Ok((model, info))
}

/// List of violations as JSON; empty when the model is well formed.
#[pyfunction]
fn validate(model_json: &str) -> PyResult<String> {
    let file = ProblemFile::parse(model_json).map_err(py_err)?;
    Ok(text(json!({ "violations": file.validate() })))
}

#[pyfunction]
#[pyo3(signature = (model_json, delay=None))]
fn solve(model_json: &str, delay: Option<usize>) -> PyResult<String> {
    let (m, info) = load(model_json, delay)?;
    let policy = solve_exact(&m, &info).map_err(py_err)?;
    Ok(text(policy.to_json(&m, &info)))
}

/// Agent 1's exact best response to the agent-2 prescriptions in `psi2_json`.
#[pyfunction]
#[pyo3(signature = (model_json, psi2_json, delay=None))]
fn pbp(model_json: &str, psi2_json: &str, delay: Option<usize>) -> PyResult<String> {
    let (m, info) = load(model_json, delay)?;
    let psi2 = Psi2::from_json(psi2_json).map_err(py_err)?;
    let policy = solve_pbp_exact(&m, &info, &psi2).map_err(py_err)?;
    Ok(text(policy.to_json(&m, &info)))
}

#[pyfunction]
#[pyo3(signature = (model_json, psi2_json, n, delay=None))]
fn pbp_approx(model_json: &str, psi2_json: &str, n: usize, delay: Option<usize>) -> PyResult<String> {
    let (m, info) = load(model_json, delay)?;
    let psi2 = Psi2::from_json(psi2_json).map_err(py_err)?;
    Ok(text(solve_pbp_approx(&m, &info, &psi2, n, false).map_err(py_err)?.to_json()))
}

#[pyfunction]
#[pyo3(signature = (model_json, delay=None))]
fn oracle(model_json: &str, delay: Option<usize>) -> PyResult<String> {
    let (m, info) = load(model_json, delay)?;
    let joint = build_joint(&m).map_err(py_err)?;
    Ok(text(exhaustive_min(&joint, &m, &info, OracleOptions::default()).map_err(py_err)?.to_json()))
}

/// Monte Carlo cost of the optimal strategy.
#[pyfunction]
#[pyo3(signature = (model_json, seed=0, episodes=10_000, delay=None))]
fn simulate(model_json: &str, seed: u64, episodes: usize, delay: Option<usize>) -> PyResult<String> {
    let (m, info) = load(model_json, delay)?;
    let policy = solve_exact(&m, &info).map_err(py_err)?;
    let controller = extract_control_strategy(&policy, &m, &info);
    let report = rollout(&m, &controller, RolloutConfig { seed, episodes }, Some(policy.value.clone()))
        .map_err(py_err)?;
    Ok(text(report.to_json()))
}

#[pyfunction]
fn lattice(m: usize, n: usize) -> PyResult<String> {
    Ok(text(build_lattice(m, n).map_err(py_err)?.to_json()))
}

/// Nearest point of the resolution-`n` lattice to `point`, given as
/// rational strings such as `"1/3"`.
#[pyfunction]
fn quantize(point: Vec<String>, n: usize) -> PyResult<String> {
    let point = point
        .iter()
        .map(|p| p.parse::<Rational>().map_err(|e| PyValueError::new_err(format!("{p}: {e}"))))
        .collect::<PyResult<Vec<_>>>()?;
    let lattice = build_lattice(point.len(), n).map_err(py_err)?;
    let q = nearest(&lattice, &point).map_err(py_err)?;
    let p = lattice.point(q.index);
    let tv = tv_distance(&point, &p).map_err(py_err)?;
    Ok(text(json!({
        "index": q.index,
        "point": p.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "tv_distance": tv.to_string(),
    })))
}

#[pymodule]
fn nested_dp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(pbp, m)?)?;
    m.add_function(wrap_pyfunction!(pbp_approx, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lattice, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    Ok(())
}
