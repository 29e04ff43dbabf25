use serde::{Deserialize, Serialize};

use super::kinematics::RobotState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { kp: 3.0, ki: 0.5 }
    }
}

/// PI law on the position of one mounted node.
#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    pub gains: ControllerGains,
    pub integral: [f64; 2],
}

impl PiController {
    pub fn new(gains: ControllerGains) -> Result<Self> {
        if !(gains.kp > 0.0 && gains.ki > 0.0) {
            return Err(Error::InvalidParameter(format!("PI gains must be positive: {gains:?}")));
        }
        Ok(Self { gains, integral: [0.0; 2] })
    }

    pub fn reset(&mut self) {
        self.integral = [0.0; 2];
    }

    /// u~ = Kp e + Ki I, then I <- I + e dt.
    pub fn planar_velocity(&mut self, target: [f64; 2], measured: [f64; 2], dt: f64) -> [f64; 2] {
        let e = [target[0] - measured[0], target[1] - measured[1]];
        let u = [
            self.gains.kp * e[0] + self.gains.ki * self.integral[0],
            self.gains.kp * e[1] + self.gains.ki * self.integral[1],
        ];
        self.integral[0] += e[0] * dt;
        self.integral[1] += e[1] * dt;
        u
    }
}

/// (v, omega) = T(theta) u~ for a node mounted at (alpha, beta), alpha != 0.
pub fn velocity_to_unicycle(theta: f64, offset: [f64; 2], u: [f64; 2]) -> Result<(f64, f64)> {
    let [alpha, beta] = offset;
    if alpha == 0.0 {
        return Err(Error::InvalidParameter("transceiver offset alpha must be nonzero".into()));
    }
    let (s, c) = theta.sin_cos();
    let v = ((alpha * c - beta * s) * u[0] + (alpha * s + beta * c) * u[1]) / alpha;
    let w = (-s * u[0] + c * u[1]) / alpha;
    Ok((v, w))
}

/// PI step for node `k` of `robot`: planar velocity, then unicycle command.
pub fn pi_velocity_controller(
    ctrl: &mut PiController,
    robot: &RobotState,
    k: usize,
    target: [f64; 2],
    dt: f64,
) -> Result<(f64, f64)> {
    let u = ctrl.planar_velocity(target, robot.transceiver(k), dt);
    velocity_to_unicycle(robot.theta, robot.offsets[k], u)
}

pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + t
    } else {
        r
    }
}

/// Proportional pose controller in polar coordinates
/// (v = k_rho rho, omega = k_alpha alpha + k_beta beta), driving backwards
/// when the goal lies behind the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseController {
    pub k_rho: f64,
    pub k_alpha: f64,
    pub k_beta: f64,
    /// Heading gain used once the position is reached.
    pub k_heading: f64,
    pub position_tol: f64,
}

impl Default for PoseController {
    fn default() -> Self {
        Self { k_rho: 2.0, k_alpha: 6.0, k_beta: -1.5, k_heading: 2.0, position_tol: 1e-3 }
    }
}

impl PoseController {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_rho > 0.0 && self.k_beta < 0.0 && self.k_alpha > self.k_rho && self.k_heading > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pose gains need k_rho > 0, k_beta < 0, k_alpha > k_rho, k_heading > 0: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn command(&self, robot: &RobotState, goal: [f64; 3]) -> (f64, f64) {
        let dx = goal[0] - robot.x;
        let dy = goal[1] - robot.y;
        let rho = dx.hypot(dy);
        if rho < self.position_tol {
            return (0.0, self.k_heading * wrap_angle(goal[2] - robot.theta));
        }
        let mut alpha = wrap_angle(dy.atan2(dx) - robot.theta);
        let mut sign = 1.0;
        if alpha.abs() > std::f64::consts::FRAC_PI_2 {
            alpha = wrap_angle(alpha + std::f64::consts::PI);
            sign = -1.0;
        }
        let beta = wrap_angle(goal[2] - robot.theta - alpha);
        (sign * self.k_rho * rho, self.k_alpha * alpha + self.k_beta * beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::monocycle_step;

    #[test]
    fn zero_error_gives_zero_command() {
        let mut c = PiController::new(ControllerGains::default()).unwrap();
        let r = RobotState::new(0.0, 0.0, 0.3, vec![[0.5, 0.5]]);
        let (v, w) = pi_velocity_controller(&mut c, &r, 0, r.transceiver(0), 0.05).unwrap();
        assert_eq!((v, w), (0.0, 0.0));
    }

    #[test]
    fn substitution_example() {
        let (v, w) = velocity_to_unicycle(0.0, [1.0, 0.0], [1.0, 0.0]).unwrap();
        assert_eq!((v, w), (1.0, 0.0));
        assert!(velocity_to_unicycle(0.0, [0.0, 1.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn t_matrix_inverts_node_kinematics() {
        let r = RobotState::new(0.3, -0.2, 1.1, vec![[0.5, 0.5]]);
        let u = [0.4, -0.7];
        let (v, w) = velocity_to_unicycle(r.theta, r.offsets[0], u).unwrap();
        let h = 1e-6;
        let n = monocycle_step(&r, v, w, h, h).unwrap();
        let (p0, p1) = (r.transceiver(0), n.transceiver(0));
        assert!(((p1[0] - p0[0]) / h - u[0]).abs() < 1e-5);
        assert!(((p1[1] - p0[1]) / h - u[1]).abs() < 1e-5);
    }

    #[test]
    fn pose_controller_reaches_goal() {
        let pc = PoseController::default();
        pc.validate().unwrap();
        for goal in [[2.0, 1.0, 0.5], [-1.0, 0.5, 3.0], [0.0, -2.0, -1.0]] {
            let mut r = RobotState::new(0.0, 0.0, 0.0, vec![]);
            for _ in 0..4000 {
                let (v, w) = pc.command(&r, goal);
                r = monocycle_step(&r, v, w, 0.01, 0.01).unwrap();
            }
            assert!((r.x - goal[0]).hypot(r.y - goal[1]) < 1e-2, "{goal:?}: {r:?}");
            assert!(wrap_angle(r.theta - goal[2]).abs() < 0.05, "{goal:?}: {r:?}");
        }
    }

    #[test]
    fn wrap_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
