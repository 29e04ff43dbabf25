use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fisher::{fim, CrlbResult, NoiseModel, DEFAULT_PINV_TOL};
use crate::geometry::{Configuration, NodeId, RangingGraph};
use crate::linalg;
use crate::potentials::{trace_with_partial, GradientField};

/// Position rows of a nullspace basis plus the sparse derivatives of its
/// entries with respect to each tag coordinate.
///
/// `a` has one row per tag coordinate (tag-major). `partials[n * t + c]`
/// lists `(row, col, d a[row, col] / d xi_{t,c})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedBasis {
    pub a: DMatrix<f64>,
    pub partials: Vec<Vec<(usize, usize, f64)>>,
}

impl ConstrainedBasis {
    /// Dense derivative of `a` with respect to coordinate `coord` of tag `tag`.
    pub fn partial_matrix(&self, dim: usize, tag: usize, coord: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.a.nrows(), self.a.ncols());
        for &(r, c, v) in &self.partials[dim * tag + coord] {
            d[(r, c)] += v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedBound {
    /// Position block of the constrained bound.
    pub bound: DMatrix<f64>,
    /// Inverse (or pseudo-inverse) of F_c = A^T F_U A.
    pub fc_inv: DMatrix<f64>,
    pub pseudo_inverse: bool,
    pub value: f64,
}

/// B = A (A^T F_U A)^+ A^T.
pub fn constrained_crlb(f_u: &DMatrix<f64>, a: &DMatrix<f64>) -> CrlbResult {
    let f_c = linalg::symmetrize(&(a.transpose() * f_u * a));
    let (inv, pseudo_inverse) = linalg::inverse_or_pinv(&f_c, DEFAULT_PINV_TOL);
    CrlbResult { bound: linalg::symmetrize(&(a * inv * a.transpose())), pseudo_inverse }
}

pub fn constrained_bound(f_u: &DMatrix<f64>, basis: &ConstrainedBasis) -> Result<ConstrainedBound> {
    if basis.a.nrows() != f_u.nrows() {
        return Err(Error::Dimension(format!("basis has {} rows, F_U has {}", basis.a.nrows(), f_u.nrows())));
    }
    let a = &basis.a;
    let f_c = linalg::symmetrize(&(a.transpose() * f_u * a));
    let (fc_inv, pseudo_inverse) = linalg::inverse_or_pinv(&f_c, DEFAULT_PINV_TOL);
    let bound = linalg::symmetrize(&(a * &fc_inv * a.transpose()));
    let value = bound.trace();
    Ok(ConstrainedBound { bound, fc_inv, pseudo_inverse, value })
}

/// Gradient of J_c = tr(A F_c^{-1} A^T) with respect to the mobile nodes.
///
/// With D = A F_c^{-1}:
/// dJ_c = 2 <dA, D> - 2 <dA, F_U A D^T D> - tr(A D^T D A^T dF_U).
pub fn constrained_gradient(
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    basis: &ConstrainedBasis,
    mobile: &[usize],
) -> Result<GradientField> {
    let n = graph.dim();
    let f_u = fim(graph, config, noise)?.tag_block();
    let cb = constrained_bound(&f_u, basis)?;
    if cb.pseudo_inverse {
        let (vals, _) = linalg::sym_eigen_sorted(&(basis.a.transpose() * &f_u * &basis.a));
        return Err(Error::Singular { lambda_min: vals[0] });
    }
    let a = &basis.a;
    let d = a * &cb.fc_inv;
    let dtd = d.transpose() * &d;
    let g = &f_u * a * &dtd;
    let m = linalg::symmetrize(&(a * &dtd * a.transpose()));
    let mut entries = BTreeMap::new();
    for &i in mobile {
        if i >= graph.node_count() {
            return Err(Error::NotMobile(i));
        }
        let mut grad = DVector::zeros(n);
        for c in 0..n {
            let mut v = -trace_with_partial(&m, graph, config, noise, i, c)?;
            if graph.is_tag(i) {
                for &(r, col, val) in &basis.partials[n * i + c] {
                    v += 2.0 * val * (d[(r, col)] - g[(r, col)]);
                }
            }
            grad[c] = v;
        }
        entries.insert(NodeId(i), grad);
    }
    Ok(GradientField { value: cb.value, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_basis_gives_unconstrained_bound() {
        let f = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = constrained_crlb(&f, &DMatrix::identity(3, 3));
        assert!(!b.pseudo_inverse);
        assert!((b.bound - f.try_inverse().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn invariant_under_recombination() {
        let f = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0]);
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let b1 = constrained_crlb(&f, &a).bound;
        let b2 = constrained_crlb(&f, &(&a * t)).bound;
        assert!((b1 - b2).norm() < 1e-12);
    }

    #[test]
    fn singular_fc_falls_back_to_pseudo_inverse() {
        let f = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let b = constrained_crlb(&f, &DMatrix::identity(2, 2));
        assert!(b.pseudo_inverse);
        assert!((b.bound[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
