//! Python bindings: FIM, rigidity matrix, localizability potentials and their
//! gradients, the property suites and scenario runs.

use std::collections::BTreeMap;

use localizability::cli::{ScenarioConfig, TRACKING_TRANSIENT};
use localizability::fisher::{fim as core_fim, NoiseModel};
use localizability::geometry::{build_graph, rigidity_matrix as core_rigidity, Configuration, RangingGraph};
use localizability::potentials::{potential_gradient as core_gradient, potential_value, PotentialKind};
use localizability::scenarios::{run_inspection_scenario, run_ugv_scenario, ScenarioKind};
use localizability::verify::{run_all, Fault, SuiteOptions};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn network(
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    pairs: &[(usize, usize)],
    points: &[Vec<f64>],
) -> PyResult<(RangingGraph, Configuration)> {
    let g = build_graph(dim, tag_count, anchor_count, pairs).map_err(py_err)?;
    let c = Configuration::from_points(dim, points).map_err(py_err)?;
    if c.len() != g.node_count() {
        return Err(py_err(format!("expected {} points, got {}", g.node_count(), c.len())));
    }
    Ok((g, c))
}

fn noise_model(sigma: f64, noise: &str) -> PyResult<NoiseModel> {
    let kind = match noise {
        "additive" => localizability::fisher::NoiseKind::Additive,
        "log_normal" | "lognormal" => localizability::fisher::NoiseKind::LogNormal,
        other => return Err(py_err(format!("unknown noise model {other:?}; use \"additive\" or \"log_normal\""))),
    };
    NoiseModel::new(kind, sigma).map_err(py_err)
}

fn potential_kind(kind: &str) -> PyResult<PotentialKind> {
    match kind {
        "A" | "a_opt" => Ok(PotentialKind::AOpt),
        "D" | "d_opt" => Ok(PotentialKind::DOpt),
        "E" | "e_opt" => Ok(PotentialKind::EOpt),
        other => Err(py_err(format!("unknown potential {other:?}; use \"A\", \"D\" or \"E\""))),
    }
}

/// Full Fisher information matrix, tags first.
#[pyfunction]
#[pyo3(signature = (dim, tag_count, anchor_count, pairs, points, sigma, noise = "additive"))]
fn fim(
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    pairs: Vec<(usize, usize)>,
    points: Vec<Vec<f64>>,
    sigma: f64,
    noise: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let (g, c) = network(dim, tag_count, anchor_count, &pairs, &points)?;
    let f = core_fim(&g, &c, &noise_model(sigma, noise)?).map_err(py_err)?;
    Ok(rows(&f.full))
}

/// Rigidity matrix over all edges (ranging pairs, then anchor-anchor links).
#[pyfunction]
fn rigidity_matrix(
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    pairs: Vec<(usize, usize)>,
    points: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let (g, c) = network(dim, tag_count, anchor_count, &pairs, &points)?;
    Ok(rows(&core_rigidity(&g, &c).map_err(py_err)?))
}

/// J_A, J_D or J_E of the tag block.
#[pyfunction]
#[pyo3(signature = (kind, dim, tag_count, anchor_count, pairs, points, sigma, noise = "additive"))]
#[allow(clippy::too_many_arguments)]
fn potential(
    kind: &str,
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    pairs: Vec<(usize, usize)>,
    points: Vec<Vec<f64>>,
    sigma: f64,
    noise: &str,
) -> PyResult<f64> {
    let (g, c) = network(dim, tag_count, anchor_count, &pairs, &points)?;
    let f_u = core_fim(&g, &c, &noise_model(sigma, noise)?).map_err(py_err)?.tag_block();
    potential_value(potential_kind(kind)?, &f_u).map_err(py_err)
}

/// Gradient of a potential with respect to the given nodes (all by default),
/// as {node: gradient}.
#[pyfunction]
#[pyo3(signature = (kind, dim, tag_count, anchor_count, pairs, points, sigma, noise = "additive", nodes = None))]
#[allow(clippy::too_many_arguments)]
fn potential_gradient(
    kind: &str,
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    pairs: Vec<(usize, usize)>,
    points: Vec<Vec<f64>>,
    sigma: f64,
    noise: &str,
    nodes: Option<Vec<usize>>,
) -> PyResult<BTreeMap<usize, Vec<f64>>> {
    let (g, c) = network(dim, tag_count, anchor_count, &pairs, &points)?;
    let nodes = nodes.unwrap_or_else(|| (0..g.node_count()).collect());
    let field = core_gradient(potential_kind(kind)?, &g, &c, &noise_model(sigma, noise)?, &nodes).map_err(py_err)?;
    Ok(field.entries.iter().map(|(i, v)| (i.0, v.iter().copied().collect())).collect())
}

/// (name, passed, measured, tolerance, instances)
type ReportTuple = (String, bool, f64, f64, usize);

/// Property suites; one report tuple each.
#[pyfunction]
#[pyo3(signature = (seed = 0, instances = 5, power_instances = 2))]
fn verify(seed: u64, instances: usize, power_instances: usize) -> PyResult<Vec<ReportTuple>> {
    let opts = SuiteOptions { seed, instances, power_instances, fault: Fault::None, ..SuiteOptions::default() };
    let reports = run_all(&opts).map_err(py_err)?;
    Ok(reports.into_iter().map(|r| (r.name, r.passed, r.measured, r.tolerance, r.instances)).collect())
}

/// Runs the scenario described by a TOML configuration (same format as the
/// command line) and returns the summary as JSON text.
#[pyfunction]
#[pyo3(signature = (config_toml = ""))]
fn run_scenario(config_toml: &str) -> PyResult<String> {
    let cfg = ScenarioConfig::from_toml(config_toml).map_err(py_err)?;
    let trace = match cfg.scenario.which {
        ScenarioKind::Inspection => run_inspection_scenario(&cfg.inspection_config()),
        ScenarioKind::Ugv => run_ugv_scenario(&cfg.ugv_config(cfg.constraints.mode)),
    }
    .map_err(py_err)?;
    serde_json::to_string(&trace.summary(TRACKING_TRANSIENT)).map_err(py_err)
}

#[pymodule]
fn pylocalizability(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fim, m)?)?;
    m.add_function(wrap_pyfunction!(rigidity_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(potential_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
