//! Rigid-body constraints for robots carrying several tags.

mod bound;
mod distance;
mod pose;
mod primal_dual;
mod rotation;
mod rp;

pub use bound::{constrained_bound, constrained_crlb, constrained_gradient, ConstrainedBasis, ConstrainedBound};
pub use distance::{constrained_potential_gradient, distance_basis, distance_constraints, distance_nullspace};
pub use pose::{project_to_rigid_pose, RigidPose};
pub use primal_dual::{primal_dual_step, ArmijoParams, PrimalDualState};
pub use rotation::{orientation_dim, rotation_exp, rotation_log};
pub use rp::{rp_basis, rp_constrained_crlb, rp_constraints, rp_potential_gradient, RpBound, RpSystem};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    #[serde(rename = "D", alias = "distance_only")]
    DistanceOnly,
    #[serde(rename = "RP", alias = "relative_position")]
    RelativePosition,
}

/// Tags mounted on one robot. The first tag is the reference tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidGroup {
    pub robot: usize,
    pub tags: Vec<usize>,
    /// Position of each tag in the robot frame, aligned with `tags`.
    pub offsets: Vec<Vec<f64>>,
    /// Orientation: one angle in 2D, exponential coordinates in 3D.
    pub theta: Vec<f64>,
}

impl RigidGroup {
    pub fn new(robot: usize, tags: Vec<usize>, offsets: Vec<Vec<f64>>, theta: Vec<f64>) -> Self {
        Self { robot, tags, offsets, theta }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn reference(&self) -> usize {
        self.tags[0]
    }

    pub fn offset(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.offsets[k])
    }

    /// p^r_{j 1}: offset of tag k relative to the reference tag, robot frame.
    pub fn relative_offset(&self, k: usize) -> DVector<f64> {
        self.offset(k) - self.offset(0)
    }

    /// Tag positions generated by placing the robot frame at `origin` with orientation `theta`.
    pub fn placed(&self, origin: &[f64], theta: &[f64]) -> Result<Vec<DVector<f64>>> {
        let n = origin.len();
        let rot = rotation_exp(theta, n)?;
        let o = DVector::from_column_slice(origin);
        Ok((0..self.len()).map(|k| &o + &rot * self.offset(k)).collect())
    }
}

/// A partition of (some of) the tags into rigid groups. Tags outside every
/// group are single-tag robots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBodySet {
    pub dim: usize,
    pub tag_count: usize,
    pub groups: Vec<RigidGroup>,
}

impl RigidBodySet {
    pub fn new(dim: usize, tag_count: usize, groups: Vec<RigidGroup>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Dimension(format!("dimension must be 2 or 3, got {dim}")));
        }
        let q = orientation_dim(dim)?;
        let mut seen = vec![false; tag_count];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidGroup(format!("robot {} has no tags", g.robot)));
            }
            if g.offsets.len() != g.len() {
                return Err(Error::InvalidGroup(format!("robot {}: one offset per tag required", g.robot)));
            }
            if g.offsets.iter().any(|o| o.len() != dim) || g.theta.len() != q {
                return Err(Error::InvalidGroup(format!("robot {}: wrong offset or orientation size", g.robot)));
            }
            for &t in &g.tags {
                if t >= tag_count {
                    return Err(Error::InvalidGroup(format!("robot {}: {t} is not a tag", g.robot)));
                }
                if seen[t] {
                    return Err(Error::InvalidGroup(format!("tag {t} belongs to two groups")));
                }
                seen[t] = true;
            }
        }
        Ok(Self { dim, tag_count, groups })
    }

    /// Tags not covered by any group, ascending.
    pub fn singles(&self) -> Vec<usize> {
        let mut covered = vec![false; self.tag_count];
        for g in &self.groups {
            for &t in &g.tags {
                covered[t] = true;
            }
        }
        (0..self.tag_count).filter(|&t| !covered[t]).collect()
    }

    /// Groups with at least two tags.
    pub fn multi(&self) -> impl Iterator<Item = &RigidGroup> {
        self.groups.iter().filter(|g| g.len() >= 2)
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.groups.iter().map(|g| g.theta.clone()).collect()
    }

    pub fn set_thetas(&mut self, thetas: &[Vec<f64>]) {
        for (g, t) in self.groups.iter_mut().zip(thetas) {
            g.theta = t.clone();
        }
    }

    /// Places each robot and writes its tag positions into `config`.
    pub fn write_poses(&mut self, config: &mut Configuration, poses: &[RigidPose]) -> Result<()> {
        for (g, pose) in self.groups.iter_mut().zip(poses) {
            let pts = g.placed(pose.position.as_slice(), &pose.theta)?;
            for (&t, p) in g.tags.iter().zip(&pts) {
                config.set_point(t, p.as_slice());
            }
            g.theta = pose.theta.clone();
        }
        Ok(())
    }

    /// Projects every multi-tag robot onto its closest rigid pose and returns
    /// the feasible configuration together with the fitted poses.
    pub fn project(&mut self, config: &Configuration) -> Result<(Configuration, Vec<RigidPose>)> {
        let mut out = config.clone();
        let mut poses = Vec::with_capacity(self.groups.len());
        for g in &mut self.groups {
            let desired: Vec<DVector<f64>> = g.tags.iter().map(|&t| config.point_vec(t)).collect();
            let pose = project_to_rigid_pose(g, &desired)?;
            for (&t, p) in g.tags.iter().zip(&pose.tag_positions) {
                out.set_point(t, p.as_slice());
            }
            g.theta = pose.theta.clone();
            poses.push(pose);
        }
        Ok((out, poses))
    }
}
