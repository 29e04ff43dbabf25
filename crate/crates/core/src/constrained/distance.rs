use nalgebra::{DMatrix, DVector, Vector3};

use super::bound::{constrained_gradient, ConstrainedBasis};
use super::{rp, ConstraintKind, RigidBodySet};
use crate::error::{Error, Result};
use crate::fisher::NoiseModel;
use crate::geometry::{euclidean_motion_basis, Configuration, RangingGraph};
use crate::potentials::GradientField;

fn check_config(set: &RigidBodySet, config: &Configuration) -> Result<()> {
    if config.dim() != set.dim || config.len() < set.tag_count {
        return Err(Error::Dimension(format!(
            "configuration has {} points in dimension {}, expected at least {} in dimension {}",
            config.len(),
            config.dim(),
            set.tag_count,
            set.dim
        )));
    }
    Ok(())
}

/// Residuals ||p_ij||^2 - d_ij^2 for every intra-group pair and their Jacobian
/// with respect to the stacked tag coordinates. Rows go group by group, pairs
/// in lexicographic order of the group's tag list.
pub fn distance_constraints(set: &RigidBodySet, config: &Configuration) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_config(set, config)?;
    let n = set.dim;
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for g in &set.groups {
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                let d = (g.offset(a) - g.offset(b)).norm();
                rows.push((g.tags[a], g.tags[b], d));
            }
        }
    }
    let mut res = DVector::zeros(rows.len());
    let mut jac = DMatrix::zeros(rows.len(), n * set.tag_count);
    for (k, &(i, j, d)) in rows.iter().enumerate() {
        let p = config.diff(i, j);
        res[k] = p.norm_squared() - d * d;
        for c in 0..n {
            jac[(k, n * i + c)] = 2.0 * p[c];
            jac[(k, n * j + c)] = -2.0 * p[c];
        }
    }
    Ok((res, jac))
}

/// Kernel basis of the distance-constraint Jacobian: one Euclidean motion
/// basis per multi-tag group, identity columns for single tags.
pub fn distance_nullspace(set: &RigidBodySet, config: &Configuration) -> Result<DMatrix<f64>> {
    Ok(distance_basis(set, config)?.a)
}

pub fn distance_basis(set: &RigidBodySet, config: &Configuration) -> Result<ConstrainedBasis> {
    check_config(set, config)?;
    let n = set.dim;
    let rows = n * set.tag_count;
    let mut blocks: Vec<Vec<usize>> = set.groups.iter().map(|g| g.tags.clone()).collect();
    blocks.extend(set.singles().into_iter().map(|t| vec![t]));
    let motion = if n == 2 { 3 } else { 6 };
    let cols: usize = blocks.iter().map(|b| if b.len() >= 2 { motion } else { n }).sum();
    let mut a = DMatrix::zeros(rows, cols);
    let mut partials = vec![Vec::new(); rows];
    let mut col = 0;
    for tags in &blocks {
        if tags.len() < 2 {
            for c in 0..n {
                a[(n * tags[0] + c, col + c)] = 1.0;
            }
            col += n;
            continue;
        }
        let pts: Vec<Vec<f64>> = tags.iter().map(|&t| config.point(t).iter().copied().collect()).collect();
        let sub = Configuration::from_points(n, &pts)?;
        let basis = euclidean_motion_basis(&sub).map_err(|e| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("rigid group {tags:?}: {m}")),
            other => other,
        })?;
        for (k, &t) in tags.iter().enumerate() {
            for c in 0..n {
                for m in 0..motion {
                    a[(n * t + c, col + m)] = basis.columns[(n * k + c, m)];
                }
            }
            if n == 2 {
                // v_Rz has -y at the x row and x at the y row.
                partials[2 * t].push((2 * t + 1, col + 2, 1.0));
                partials[2 * t + 1].push((2 * t, col + 2, -1.0));
            } else {
                for c in 0..3 {
                    for axis in 0..3 {
                        let v = Vector3::ith(axis, 1.0).cross(&Vector3::ith(c, 1.0));
                        for r in 0..3 {
                            if v[r] != 0.0 {
                                partials[3 * t + c].push((3 * t + r, col + 3 + axis, v[r]));
                            }
                        }
                    }
                }
            }
        }
        col += motion;
    }
    Ok(ConstrainedBasis { a, partials })
}

/// Constrained A-optimal potential J_c = tr(B) and its gradient over `mobile`.
pub fn constrained_potential_gradient(
    set: &RigidBodySet,
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    kind: ConstraintKind,
    mobile: &[usize],
) -> Result<(f64, GradientField)> {
    if set.tag_count != graph.tag_count() || set.dim != graph.dim() {
        return Err(Error::Dimension("rigid body set does not match the graph".into()));
    }
    let basis = match kind {
        ConstraintKind::DistanceOnly => distance_basis(set, config)?,
        ConstraintKind::RelativePosition => rp::rp_basis(set, config)?,
    };
    let field = constrained_gradient(graph, config, noise, &basis, mobile)?;
    Ok((field.value, field))
}
