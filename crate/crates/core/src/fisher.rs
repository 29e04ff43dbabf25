//! Fisher information matrix of range measurements, its derivatives and the
//! unconstrained Cramer-Rao bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ensure_compatible, rigidity_matrix, Configuration, RangingGraph};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Additive,
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn additive(sigma: f64) -> Self {
        Self { kind: NoiseKind::Additive, sigma }
    }

    pub fn log_normal(sigma: f64) -> Self {
        Self { kind: NoiseKind::LogNormal, sigma }
    }

    pub fn kappa(&self) -> i32 {
        match self.kind {
            NoiseKind::Additive => 1,
            NoiseKind::LogNormal => 2,
        }
    }

    /// Edge weight 1 / (d^(2 kappa) sigma^2).
    pub fn weight(&self, d: f64) -> f64 {
        1.0 / (d.powi(2 * self.kappa()) * self.sigma * self.sigma)
    }
}

/// Full FIM with the tags-first partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub full: DMatrix<f64>,
    dim: usize,
    tag_count: usize,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// F_U, the tag block.
    pub fn tag_block(&self) -> DMatrix<f64> {
        let m = self.dim * self.tag_count;
        self.full.view((0, 0), (m, m)).into_owned()
    }

    /// F_UK.
    pub fn cross_block(&self) -> DMatrix<f64> {
        let m = self.dim * self.tag_count;
        let n = self.full.nrows() - m;
        self.full.view((0, m), (m, n)).into_owned()
    }

    /// F_K, the anchor block.
    pub fn anchor_block(&self) -> DMatrix<f64> {
        let m = self.dim * self.tag_count;
        let n = self.full.nrows() - m;
        self.full.view((m, m), (n, n)).into_owned()
    }
}

fn edge_diff(config: &Configuration, i: usize, j: usize) -> Result<(DVector<f64>, f64)> {
    let p = config.diff(i, j);
    let d = p.norm();
    if d == 0.0 {
        return Err(Error::SingularGeometry { i, j });
    }
    Ok((p, d))
}

/// Off-diagonal block F_ij = -p_ij p_ij^T / (d^(2 kappa) sigma^2).
pub fn fim_block(p_ij: &DVector<f64>, noise: &NoiseModel) -> DMatrix<f64> {
    let w = noise.weight(p_ij.norm());
    -(p_ij * p_ij.transpose()) * w
}

pub fn fim(graph: &RangingGraph, config: &Configuration, noise: &NoiseModel) -> Result<FisherMatrix> {
    ensure_compatible(graph, config)?;
    let n = graph.dim();
    let mut f = DMatrix::zeros(n * graph.node_count(), n * graph.node_count());
    for &(i, j) in graph.edges() {
        let (p, _) = edge_diff(config, i, j)?;
        let b = fim_block(&p, noise);
        let mut add = |r: usize, c: usize, sign: f64| {
            let mut v = f.view_mut((n * r, n * c), (n, n));
            v += &b * sign;
        };
        add(i, j, 1.0);
        add(j, i, 1.0);
        add(i, i, -1.0);
        add(j, j, -1.0);
    }
    Ok(FisherMatrix { full: f, dim: n, tag_count: graph.tag_count() })
}

/// R^T Q R with Q = diag(1 / (d^(2 kappa) sigma^2)).
pub fn fim_from_rigidity(graph: &RangingGraph, config: &Configuration, noise: &NoiseModel) -> Result<DMatrix<f64>> {
    let r = rigidity_matrix(graph, config)?;
    let mut q = DVector::zeros(graph.edge_count());
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        let (_, d) = edge_diff(config, i, j)?;
        q[k] = noise.weight(d);
    }
    let mut qr = r.clone();
    for (k, mut row) in qr.row_iter_mut().enumerate() {
        row *= q[k];
    }
    Ok(r.transpose() * qr)
}

/// dF_ij / d xi_i for coordinate `coord` of node i, with p_ij = p_i - p_j.
///
/// With w = 1/(sigma^2 d^(2 kappa)) and g = 2 kappa / (sigma^2 d^(2 kappa + 2)):
/// dF_ij/dxi_i = g p_c p p^T - w (e_c p^T + p e_c^T).
/// The derivative with respect to the same coordinate of node j is the negative.
pub fn fim_block_derivative(p_ij: &DVector<f64>, coord: usize, noise: &NoiseModel) -> Result<DMatrix<f64>> {
    let n = p_ij.len();
    if coord >= n {
        return Err(Error::Dimension(format!("coordinate {coord} out of range")));
    }
    let d2 = p_ij.norm_squared();
    if d2 == 0.0 {
        return Err(Error::Degenerate("zero-length edge".into()));
    }
    let kappa = noise.kappa();
    let s2 = noise.sigma * noise.sigma;
    let w = 1.0 / (s2 * d2.powi(kappa));
    let g = 2.0 * kappa as f64 / (s2 * d2.powi(kappa + 1));
    let mut out = p_ij * p_ij.transpose() * (g * p_ij[coord]);
    for k in 0..n {
        out[(coord, k)] -= w * p_ij[k];
        out[(k, coord)] -= w * p_ij[k];
    }
    Ok(out)
}

/// dF_U / d xi where xi is coordinate `coord` of `node` (tag or anchor).
pub fn fim_partial(
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    node: usize,
    coord: usize,
) -> Result<DMatrix<f64>> {
    ensure_compatible(graph, config)?;
    let n = graph.dim();
    let u = graph.tag_count();
    if node >= graph.node_count() {
        return Err(Error::InvalidParameter(format!("node {node} out of range")));
    }
    let mut out = DMatrix::zeros(n * u, n * u);
    for &j in graph.neighbors(node) {
        let (p, _) = edge_diff(config, node, j)?;
        let dblk = fim_block_derivative(&p, coord, noise)?;
        let node_tag = graph.is_tag(node);
        let j_tag = graph.is_tag(j);
        if node_tag {
            let mut v = out.view_mut((n * node, n * node), (n, n));
            v -= &dblk;
        }
        if j_tag {
            let mut v = out.view_mut((n * j, n * j), (n, n));
            v -= &dblk;
        }
        if node_tag && j_tag {
            let mut v = out.view_mut((n * node, n * j), (n, n));
            v += &dblk;
            let mut v = out.view_mut((n * j, n * node), (n, n));
            v += &dblk;
        }
    }
    Ok(out)
}

pub const DEFAULT_PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    pub bound: DMatrix<f64>,
    pub pseudo_inverse: bool,
}

/// F_U^{-1}, or its pseudo-inverse when lambda_min <= tol * lambda_max.
pub fn crlb_unconstrained(f_u: &DMatrix<f64>, tol: f64) -> CrlbResult {
    let (bound, pseudo_inverse) = linalg::inverse_or_pinv(f_u, tol);
    CrlbResult { bound, pseudo_inverse }
}
