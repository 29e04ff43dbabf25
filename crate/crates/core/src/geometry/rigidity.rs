use nalgebra::{DMatrix, DVector, Vector3};

use super::{Configuration, RangingGraph};
use crate::error::{Error, Result};
use crate::linalg;

/// Columns spanning the infinitesimal Euclidean motions of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionBasis {
    pub columns: DMatrix<f64>,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

fn check_dims(graph: &RangingGraph, config: &Configuration) -> Result<()> {
    if graph.dim() != config.dim() || graph.node_count() != config.len() {
        return Err(Error::Dimension(format!(
            "graph has {} nodes in {}D, configuration has {} in {}D",
            graph.node_count(),
            graph.dim(),
            config.len(),
            config.dim()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_compatible(graph: &RangingGraph, config: &Configuration) -> Result<()> {
    check_dims(graph, config)
}

/// r_(i->j) = 1/2 |p_ij|^2, in edge order.
pub fn rigidity_function(graph: &RangingGraph, config: &Configuration) -> Result<DVector<f64>> {
    check_dims(graph, config)?;
    Ok(DVector::from_iterator(
        graph.edge_count(),
        graph.edges().iter().map(|&(i, j)| 0.5 * config.diff(i, j).norm_squared()),
    ))
}

/// R = diag(p_ij^T) (H kron I_n).
pub fn rigidity_matrix(graph: &RangingGraph, config: &Configuration) -> Result<DMatrix<f64>> {
    check_dims(graph, config)?;
    let n = graph.dim();
    let mut r = DMatrix::zeros(graph.edge_count(), n * graph.node_count());
    for (row, &(i, j)) in graph.edges().iter().enumerate() {
        let p = config.diff(i, j);
        for c in 0..n {
            r[(row, n * i + c)] = p[c];
            r[(row, n * j + c)] = -p[c];
        }
    }
    Ok(r)
}

/// Translation and rotation basis: (T_x, T_y, R_z) in 2D and
/// (T_x, T_y, T_z, R_x, R_y, R_z) in 3D.
pub fn euclidean_motion_basis(config: &Configuration) -> Result<MotionBasis> {
    let n = config.dim();
    let count = config.len();
    check_nondegenerate(config)?;
    let m = if n == 2 { 3 } else { 6 };
    let mut cols = DMatrix::zeros(n * count, m);
    for i in 0..count {
        for c in 0..n {
            cols[(n * i + c, c)] = 1.0;
        }
        let p = config.point(i);
        if n == 2 {
            cols[(2 * i, 2)] = -p[1];
            cols[(2 * i + 1, 2)] = p[0];
        } else {
            let pv = Vector3::new(p[0], p[1], p[2]);
            for axis in 0..3 {
                let v = Vector3::ith(axis, 1.0).cross(&pv);
                for c in 0..3 {
                    cols[(3 * i + c, 3 + axis)] = v[c];
                }
            }
        }
    }
    Ok(MotionBasis { columns: cols })
}

fn check_nondegenerate(config: &Configuration) -> Result<()> {
    let count = config.len();
    if count == 0 {
        return Err(Error::Degenerate("empty configuration".into()));
    }
    let scale = (0..count).map(|i| config.point(i).norm()).fold(1.0, f64::max);
    let p0 = config.point_vec(0);
    let far = (1..count).map(|i| (i, (config.point(i) - &p0).norm())).max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((k, dmax)) = far else {
        return Err(Error::Degenerate("need at least two nodes".into()));
    };
    if dmax <= 1e-12 * scale {
        return Err(Error::Degenerate("all nodes coincide".into()));
    }
    if config.dim() == 3 {
        let u = config.point(k) - &p0;
        let u = Vector3::new(u[0], u[1], u[2]);
        let aligned = (1..count).all(|i| {
            let w = config.point(i) - &p0;
            Vector3::new(w[0], w[1], w[2]).cross(&u).norm() <= 1e-12 * scale * scale
        });
        if aligned {
            return Err(Error::Degenerate("all nodes are collinear".into()));
        }
    }
    Ok(())
}

pub fn is_infinitesimally_rigid(graph: &RangingGraph, config: &Configuration, tol: f64) -> Result<bool> {
    check_nondegenerate(config)?;
    let r = rigidity_matrix(graph, config)?;
    let n = graph.dim();
    let m = if n == 2 { 3 } else { 6 };
    Ok(linalg::rank(&r, tol) == n * graph.node_count() - m)
}
