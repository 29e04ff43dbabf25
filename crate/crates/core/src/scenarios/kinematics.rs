use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar monocycle with transceivers mounted at fixed robot-frame offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// (alpha, beta) of each mounted node in the robot frame.
    pub offsets: Vec<[f64; 2]>,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64, offsets: Vec<[f64; 2]>) -> Self {
        Self { x, y, theta, offsets }
    }

    /// World position of mounted node `k`.
    pub fn transceiver(&self, k: usize) -> [f64; 2] {
        let [a, b] = self.offsets[k];
        let (s, c) = self.theta.sin_cos();
        [self.x + c * a - s * b, self.y + s * a + c * b]
    }

    /// Robot placed so that node `k` sits at `p` with heading `theta`.
    pub fn with_transceiver_at(p: [f64; 2], theta: f64, offsets: Vec<[f64; 2]>, k: usize) -> Self {
        let mut r = Self::new(0.0, 0.0, theta, offsets);
        let q = r.transceiver(k);
        r.x = p[0] - q[0];
        r.y = p[1] - q[1];
        r
    }
}

/// Explicit Euler integration of x' = v cos(theta), y' = v sin(theta),
/// theta' = omega over `dt`, split into substeps no longer than `dt_max`.
pub fn monocycle_step(state: &RobotState, v: f64, omega: f64, dt: f64, dt_max: f64) -> Result<RobotState> {
    if !(dt > 0.0) || !(dt_max > 0.0) {
        return Err(Error::InvalidParameter(format!("time steps must be positive (dt = {dt}, dt_max = {dt_max})")));
    }
    let n = (dt / dt_max).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut s = state.clone();
    for _ in 0..n {
        let (sn, cs) = s.theta.sin_cos();
        s.x += h * v * cs;
        s.y += h * v * sn;
        s.theta += h * omega;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_line() {
        let s = RobotState::new(0.0, 0.0, 0.0, vec![]);
        let n = monocycle_step(&s, 1.0, 0.0, 1.0, 0.01).unwrap();
        assert!((n.x - 1.0).abs() < 1e-12 && n.y.abs() < 1e-12);
    }

    #[test]
    fn pure_rotation() {
        let s = RobotState::new(2.0, 3.0, 0.5, vec![]);
        let n = monocycle_step(&s, 0.0, 0.7, 2.0, 0.01).unwrap();
        assert_eq!((n.x, n.y), (2.0, 3.0));
        assert!((n.theta - 1.9).abs() < 1e-12);
    }

    #[test]
    fn arc_matches_closed_form() {
        // v = omega = 1 traces the unit circle centred at (0, 1).
        let s = RobotState::new(0.0, 0.0, 0.0, vec![]);
        for dt_max in [1e-2, 1e-3] {
            let n = monocycle_step(&s, 1.0, 1.0, PI, dt_max).unwrap();
            assert!((n.theta - PI).abs() < 1e-9);
            let err = ((n.x - PI.sin()).powi(2) + (n.y - (1.0 - PI.cos())).powi(2)).sqrt();
            assert!(err < 2.0 * dt_max, "dt_max {dt_max}: {err}");
        }
    }

    #[test]
    fn transceiver_offset() {
        let r = RobotState::new(1.0, 1.0, PI / 2.0, vec![[0.5, 0.5]]);
        let p = r.transceiver(0);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 1.5).abs() < 1e-12);
        let r2 = RobotState::with_transceiver_at(p, PI / 2.0, vec![[0.5, 0.5]], 0);
        assert!((r2.x - 1.0).abs() < 1e-12 && (r2.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_dt() {
        let s = RobotState::new(0.0, 0.0, 0.0, vec![]);
        assert!(monocycle_step(&s, 1.0, 0.0, 0.0, 0.01).is_err());
    }
}
