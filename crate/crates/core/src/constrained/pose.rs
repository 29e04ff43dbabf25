use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rotation::{rotation_exp, rotation_log};
use super::RigidGroup;
use crate::error::{Error, Result};

/// Robot pose: frame origin in world coordinates and orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub position: Vec<f64>,
    pub theta: Vec<f64>,
    /// Tag positions produced by the pose (world frame).
    #[serde(skip)]
    pub tag_positions: Vec<DVector<f64>>,
    /// Sum of squared distances between desired and achieved tag positions.
    pub residual: f64,
}

impl RigidPose {
    pub fn new(position: Vec<f64>, theta: Vec<f64>) -> Self {
        Self { position, theta, tag_positions: Vec::new(), residual: 0.0 }
    }
}

/// Least-squares rigid fit of the group's body offsets onto `desired`
/// (orthogonal Procrustes with a determinant correction).
pub fn project_to_rigid_pose(group: &RigidGroup, desired: &[DVector<f64>]) -> Result<RigidPose> {
    let k = group.len();
    if desired.len() != k || k == 0 {
        return Err(Error::InvalidGroup(format!(
            "robot {}: {} desired positions for {k} tags",
            group.robot,
            desired.len()
        )));
    }
    let n = desired[0].len();
    let offsets: Vec<DVector<f64>> = (0..k).map(|i| group.offset(i)).collect();
    if offsets.iter().chain(desired).any(|v| v.len() != n) {
        return Err(Error::Dimension("inconsistent point dimensions".into()));
    }
    let rot = if k == 1 {
        rotation_exp(&group.theta, n)?
    } else {
        let qbar = offsets.iter().fold(DVector::zeros(n), |acc, q| acc + q) / k as f64;
        let dbar = desired.iter().fold(DVector::zeros(n), |acc, d| acc + d) / k as f64;
        let centered: Vec<DVector<f64>> = offsets.iter().map(|q| q - &qbar).collect();
        check_offsets(group, &centered)?;
        let mut h = DMatrix::zeros(n, n);
        for (q, d) in centered.iter().zip(desired) {
            h += q * (d - &dbar).transpose();
        }
        let svd = h.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let v = vt.transpose();
        let mut s = DMatrix::identity(n, n);
        if (&v * u.transpose()).determinant() < 0.0 {
            s[(n - 1, n - 1)] = -1.0;
        }
        v * s * u.transpose()
    };
    let theta = rotation_log(&rot)?;
    let rot = rotation_exp(&theta, n)?;
    let mean_rot = offsets.iter().fold(DVector::zeros(n), |acc, q| acc + &rot * q) / k as f64;
    let dbar = desired.iter().fold(DVector::zeros(n), |acc, d| acc + d) / k as f64;
    let t = dbar - mean_rot;
    let tag_positions: Vec<DVector<f64>> = offsets.iter().map(|q| &t + &rot * q).collect();
    let residual = tag_positions.iter().zip(desired).map(|(p, d)| (p - d).norm_squared()).sum();
    Ok(RigidPose { position: t.as_slice().to_vec(), theta, tag_positions, residual })
}

fn check_offsets(group: &RigidGroup, centered: &[DVector<f64>]) -> Result<()> {
    let n = centered[0].len();
    let mut cov = DMatrix::zeros(n, n);
    for q in centered {
        cov += q * q.transpose();
    }
    let (vals, _) = crate::linalg::sym_eigen_sorted(&cov);
    let top = vals[n - 1];
    // The orientation is unique when the offsets span at least n - 1 directions.
    if top <= 1e-18 || vals[1] <= 1e-12 * top {
        return Err(Error::Degenerate(format!("robot {}: body offsets do not fix the orientation", group.robot)));
    }
    Ok(())
}
