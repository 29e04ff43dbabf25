//! A-, D- and E-optimal localizability potentials and their gradients.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{fim, fim_block_derivative, NoiseModel, DEFAULT_PINV_TOL};
use crate::geometry::{Configuration, NodeId, RangingGraph};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    AOpt,
    DOpt,
    EOpt,
}

pub const EIGEN_GAP_TOL: f64 = 1e-8;

/// Potential value together with per-node gradients of the mobile nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientField {
    pub value: f64,
    pub entries: BTreeMap<NodeId, DVector<f64>>,
}

impl GradientField {
    pub fn get(&self, node: usize) -> Option<&DVector<f64>> {
        self.entries.get(&NodeId(node))
    }

    /// Concatenation of the entries in node order.
    pub fn stacked(&self) -> DVector<f64> {
        let parts: Vec<f64> = self.entries.values().flat_map(|v| v.iter().copied()).collect();
        DVector::from_vec(parts)
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }
}

fn check_positive_definite(f_u: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (vals, vecs) = linalg::sym_eigen_sorted(f_u);
    let n = vals.len();
    let lmax = vals[n - 1].abs();
    if !(vals[0] > DEFAULT_PINV_TOL * lmax) {
        return Err(Error::Singular { lambda_min: vals[0] });
    }
    Ok((vals, vecs))
}

/// Smallest eigenvalue of F_U and its unit eigenvector, sign fixed so that the
/// largest-magnitude component is positive.
pub fn min_eigenpair(f_u: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let (vals, vecs) = linalg::sym_eigen_sorted(f_u);
    if vals.len() > 1 {
        let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let gap = vals[1] - vals[0];
        if gap <= EIGEN_GAP_TOL * scale {
            return Err(Error::RepeatedEigenvalue { gap });
        }
    }
    let mut v = vecs.column(0).into_owned();
    fix_sign(&mut v);
    Ok((vals[0], v))
}

pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for k in 0..v.len() {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        *v = -v.clone();
    }
}

pub fn potential_value(kind: PotentialKind, f_u: &DMatrix<f64>) -> Result<f64> {
    match kind {
        PotentialKind::AOpt => {
            let (vals, _) = check_positive_definite(f_u)?;
            Ok(vals.iter().map(|l| 1.0 / l).sum())
        }
        PotentialKind::DOpt => {
            check_positive_definite(f_u)?;
            linalg::logdet_spd(f_u).map(|v| -v).ok_or(Error::Singular { lambda_min: 0.0 })
        }
        PotentialKind::EOpt => {
            let (vals, _) = linalg::sym_eigen_sorted(f_u);
            Ok(-vals[0])
        }
    }
}

/// tr(M dF_U/dxi) for coordinate `coord` of `node`, using only the nonzero
/// blocks of the derivative. `m` must be symmetric with tag-block indexing.
pub fn trace_with_partial(
    m: &DMatrix<f64>,
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    node: usize,
    coord: usize,
) -> Result<f64> {
    let n = graph.dim();
    let block = |a: usize, b: usize| m.view((n * a, n * b), (n, n));
    let dot =
        |x: nalgebra::DMatrixView<f64>, d: &DMatrix<f64>| -> f64 { x.iter().zip(d.iter()).map(|(p, q)| p * q).sum() };
    let mut total = 0.0;
    for &j in graph.neighbors(node) {
        let p = config.diff(node, j);
        if p.norm_squared() == 0.0 {
            return Err(Error::SingularGeometry { i: node, j });
        }
        let d = fim_block_derivative(&p, coord, noise)?;
        let node_tag = graph.is_tag(node);
        let j_tag = graph.is_tag(j);
        if node_tag {
            total -= dot(block(node, node), &d);
        }
        if j_tag {
            total -= dot(block(j, j), &d);
        }
        if node_tag && j_tag {
            total += 2.0 * dot(block(node, j), &d);
        }
    }
    Ok(total)
}

pub fn potential_gradient(
    kind: PotentialKind,
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    mobile: &[usize],
) -> Result<GradientField> {
    let f_u = fim(graph, config, noise)?.tag_block();
    for &i in mobile {
        if i >= graph.node_count() {
            return Err(Error::NotMobile(i));
        }
    }
    let (value, m, sign) = match kind {
        PotentialKind::AOpt | PotentialKind::DOpt => {
            let (vals, vecs) = check_positive_definite(&f_u)?;
            let power = if kind == PotentialKind::AOpt { 2 } else { 1 };
            let diag = DVector::from_iterator(vals.len(), vals.iter().map(|l| l.powi(-power)));
            let m = &vecs * DMatrix::from_diagonal(&diag) * vecs.transpose();
            (potential_value(kind, &f_u)?, m, -1.0)
        }
        PotentialKind::EOpt => {
            let (lambda, v) = min_eigenpair(&f_u)?;
            (-lambda, &v * v.transpose(), -1.0)
        }
    };
    let n = graph.dim();
    let mut entries = BTreeMap::new();
    for &i in mobile {
        let mut g = DVector::zeros(n);
        for c in 0..n {
            g[c] = sign * trace_with_partial(&m, graph, config, noise, i, c)?;
        }
        entries.insert(NodeId(i), g);
    }
    Ok(GradientField { value, entries })
}

/// Diagnostic T-optimal potential -tr(F_U).
pub fn t_potential(graph: &RangingGraph, config: &Configuration, noise: &NoiseModel) -> Result<f64> {
    let f = fim(graph, config, noise)?;
    Ok(-f.tag_block().trace())
}

/// p_i <- p_i - g_i min(gain, cap / |g_i|) for every node with a gradient entry.
pub fn descent_step(config: &Configuration, field: &GradientField, gain: f64, step_cap: f64) -> Configuration {
    let mut out = config.clone();
    for (node, g) in &field.entries {
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        let scale = gain.min(step_cap / norm);
        let p = config.point(node.0) - g * scale;
        out.set_point(node.0, p.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_graph;

    #[test]
    fn identity_values() {
        let i = DMatrix::identity(2, 2);
        assert_eq!(potential_value(PotentialKind::AOpt, &i).unwrap(), 2.0);
        assert_eq!(potential_value(PotentialKind::DOpt, &i).unwrap(), 0.0);
        assert_eq!(potential_value(PotentialKind::EOpt, &i).unwrap(), -1.0);
    }

    #[test]
    fn diagonal_values() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        assert!((potential_value(PotentialKind::AOpt, &d).unwrap() - 1.25).abs() < 1e-15);
        assert!((potential_value(PotentialKind::DOpt, &d).unwrap() + 4f64.ln()).abs() < 1e-15);
        assert_eq!(potential_value(PotentialKind::EOpt, &d).unwrap(), -1.0);
    }

    #[test]
    fn singular_errors() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(potential_value(PotentialKind::AOpt, &s), Err(Error::Singular { .. })));
    }

    #[test]
    fn repeated_eigenvalue_errors() {
        assert!(matches!(min_eigenpair(&DMatrix::identity(2, 2)), Err(Error::RepeatedEigenvalue { .. })));
    }

    fn toy() -> (RangingGraph, Configuration) {
        let g = build_graph(2, 1, 3, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let c =
            Configuration::from_points(2, &[vec![0.2, 0.3], vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        (g, c)
    }

    #[test]
    fn capped_step() {
        let (_, c) = toy();
        let mut f = GradientField::default();
        f.entries.insert(NodeId(0), DVector::from_vec(vec![3.0, 4.0]));
        let out = descent_step(&c, &f, 1.0, 0.2);
        assert!(((out.point(0) - c.point(0)).norm() - 0.2).abs() < 1e-15);
        f.entries.insert(NodeId(0), DVector::zeros(2));
        assert_eq!(descent_step(&c, &f, 1.0, 0.2), c);
    }

    #[test]
    fn aopt_descent_monotone() {
        let (g, mut c) = toy();
        let noise = NoiseModel::additive(1.0);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let field = potential_gradient(PotentialKind::AOpt, &g, &c, &noise, &[0]).unwrap();
            assert!(field.value <= last + 1e-9);
            last = field.value;
            c = descent_step(&c, &field, 0.01, 1.0);
        }
    }

    #[test]
    fn t_potential_examples() {
        let (g, c) = toy();
        let t = t_potential(&g, &c, &NoiseModel::additive(0.5)).unwrap();
        assert!((t + 3.0 / 0.25).abs() < 1e-12);
        let ln = NoiseModel::log_normal(1.0);
        let t1 = t_potential(&g, &c, &ln).unwrap();
        let half = Configuration::new(2, c.coords() * 0.5).unwrap();
        let t2 = t_potential(&g, &half, &ln).unwrap();
        assert!((t2 / t1 - 4.0).abs() < 1e-12);
    }
}
