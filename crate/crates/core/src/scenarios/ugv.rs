use serde::{Deserialize, Serialize};

use super::control::{wrap_angle, PoseController};
use super::inspection::complete_graph;
use super::kinematics::{monocycle_step, RobotState};
use super::trace::{ScenarioKind, ScenarioTrace, TraceStep};
use crate::constrained::{
    constrained_potential_gradient, distance_constraints, primal_dual_step, ArmijoParams, ConstraintKind,
    PrimalDualState, RigidBodySet, RigidGroup,
};
use crate::error::{Error, Result};
use crate::estimation::{monte_carlo, EstimatorKind, LsOptions, StepInstance};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::geometry::Configuration;

/// One robot carrying two tags drives towards a configuration that
/// minimises the constrained A-optimal potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UgvConfig {
    pub sigma: f64,
    pub noise: NoiseKind,
    pub mode: ConstraintKind,
    pub tag_offsets: Vec<[f64; 2]>,
    pub anchors: Vec<[f64; 2]>,
    pub start_position: [f64; 2],
    pub start_heading: f64,
    pub steps: usize,
    /// Dual step size delta.
    pub delta: f64,
    pub armijo: ArmijoParams,
    /// Plan on J_c / sigma^2 instead of J_c.
    pub normalize: bool,
    /// Largest tag displacement per planning step; 0 disables the cap.
    pub step_cap: f64,
    pub pose: PoseController,
    pub dt: f64,
    pub dt_max: f64,
    pub planning_period: f64,
    /// Trials at the first and the last step; 0 disables Monte Carlo.
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for UgvConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            noise: NoiseKind::Additive,
            mode: ConstraintKind::DistanceOnly,
            tag_offsets: vec![[1.0, 0.0], [-1.0, 0.0]],
            anchors: vec![[-5.0, 5.0], [5.0, -5.0], [5.0, 5.0]],
            start_position: [-15.0, -4.0],
            start_heading: -std::f64::consts::FRAC_PI_8,
            steps: 100,
            delta: 1.0,
            armijo: ArmijoParams { initial: 50.0, ..ArmijoParams::default() },
            normalize: true,
            step_cap: 0.5,
            pose: PoseController::default(),
            dt: 0.05,
            dt_max: 0.01,
            planning_period: 1.0,
            mc_trials: 100,
            seed: 0,
        }
    }
}

impl UgvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.tag_offsets.len() < 2 {
            return bad("the robot needs at least two tags".into());
        }
        if self.anchors.len() < 2 {
            return bad("need at least two anchors".into());
        }
        if !(self.delta > 0.0) || self.step_cap < 0.0 {
            return bad("delta must be positive and step_cap non-negative".into());
        }
        if !(self.dt > 0.0 && self.dt_max > 0.0 && self.planning_period >= self.dt) {
            return bad("need dt > 0, dt_max > 0 and planning_period >= dt".into());
        }
        if self.mc_trials == 1 {
            return bad("mc_trials must be 0 or at least 2".into());
        }
        NoiseModel::new(self.noise, self.sigma)?;
        self.pose.validate()
    }

    fn bodies(&self, theta: f64) -> Result<RigidBodySet> {
        let u = self.tag_offsets.len();
        let offsets = self.tag_offsets.iter().map(|o| o.to_vec()).collect();
        RigidBodySet::new(2, u, vec![RigidGroup::new(0, (0..u).collect(), offsets, vec![theta])])
    }
}

fn network_config(robot: &RobotState, anchors: &[[f64; 2]]) -> Result<Configuration> {
    let mut pts: Vec<Vec<f64>> = (0..robot.offsets.len()).map(|k| robot.transceiver(k).to_vec()).collect();
    pts.extend(anchors.iter().map(|a| a.to_vec()));
    Configuration::from_points(2, &pts)
}

pub fn run_ugv_scenario(cfg: &UgvConfig) -> Result<ScenarioTrace> {
    cfg.validate()?;
    let u = cfg.tag_offsets.len();
    let noise = NoiseModel::new(cfg.noise, cfg.sigma)?;
    let graph = complete_graph(u, cfg.anchors.len())?;
    let mobile: Vec<usize> = (0..u).collect();
    let scale = if cfg.normalize { 1.0 / (cfg.sigma * cfg.sigma) } else { 1.0 };

    let [x0, y0] = cfg.start_position;
    let mut robot = RobotState::new(x0, y0, cfg.start_heading, cfg.tag_offsets.clone());
    let mut bodies = cfg.bodies(robot.theta)?;
    let constraint_count = distance_constraints(&bodies, &network_config(&robot, &cfg.anchors)?)?.0.len();
    let mut lambda = nalgebra::DVector::zeros(constraint_count);

    // Waypoints are generated from the previous waypoint; the robot tracks them.
    let mut plan = network_config(&robot, &cfg.anchors)?;
    let mut plan_theta = robot.theta;
    let mut steps = Vec::with_capacity(cfg.steps + 1);
    let mut instances = Vec::new();
    let mut tracking_error = 0.0;
    for k in 0..=cfg.steps {
        let config = network_config(&robot, &cfg.anchors)?;
        bodies.groups[0].theta = vec![robot.theta];
        let (j_c, _) = constrained_potential_gradient(&bodies, &graph, &config, &noise, cfg.mode, &mobile)?;
        let residual = distance_constraints(&bodies, &config)?.0.norm();
        steps.push(TraceStep {
            step: k,
            positions: config.points(),
            headings: vec![robot.theta],
            potential: j_c,
            j_con: 0.0,
            constraint_residual: residual,
            tracking_error,
            diagnostic: None,
        });
        if cfg.mc_trials > 0 && (k == 0 || k == cfg.steps) {
            instances.push(StepInstance { graph: graph.clone(), config: config.clone(), bodies: Some(bodies.clone()) });
        }
        if k == cfg.steps {
            break;
        }

        bodies.groups[0].theta = vec![plan_theta];
        let objective = |c: &Configuration| {
            let (_, mut field) = constrained_potential_gradient(&bodies, &graph, c, &noise, cfg.mode, &mobile)?;
            field.value *= scale;
            for g in field.entries.values_mut() {
                *g *= scale;
            }
            Ok(field)
        };
        let mut state = PrimalDualState::new(plan.clone(), constraint_count, cfg.delta);
        state.lambda = lambda.clone();
        state.armijo = cfg.armijo;
        if cfg.step_cap > 0.0 {
            // Start the line search at the capped step so the accepted step still decreases the Lagrangian.
            let longest = objective(&plan)?.entries.values().map(|g| g.norm()).fold(0.0, f64::max);
            if longest * state.armijo.initial > cfg.step_cap {
                state.armijo.initial = cfg.step_cap / longest;
            }
        }
        let next = primal_dual_step(&state, objective, |c| distance_constraints(&bodies, c))?;
        lambda = next.lambda;
        let planned = next.config;
        let (waypoint, poses) = bodies.project(&planned)?;
        let pose = &poses[0];
        plan_theta = plan_theta + wrap_angle(pose.theta[0] - plan_theta);
        plan = waypoint.clone();
        let goal = [pose.position[0], pose.position[1], robot.theta + wrap_angle(plan_theta - robot.theta)];

        let ticks = (cfg.planning_period / cfg.dt).round() as usize;
        for _ in 0..ticks {
            let (v, w) = cfg.pose.command(&robot, goal);
            robot = monocycle_step(&robot, v, w, cfg.dt, cfg.dt_max)?;
        }
        tracking_error = (0..u)
            .map(|t| {
                let p = robot.transceiver(t);
                let q = waypoint.point(t);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max);
    }

    let monte_carlo = if instances.is_empty() {
        None
    } else {
        let estimator = match cfg.mode {
            ConstraintKind::DistanceOnly => EstimatorKind::DistanceConstrained,
            ConstraintKind::RelativePosition => EstimatorKind::RelativePosition,
        };
        let mut mc = monte_carlo(&instances, estimator, &noise, cfg.mc_trials, cfg.seed, &LsOptions::default())?;
        if let Some(last) = mc.steps.last_mut() {
            last.step = cfg.steps;
        }
        Some(mc)
    };
    Ok(ScenarioTrace { scenario: ScenarioKind::Ugv, mode: Some(cfg.mode), dim: 2, steps, monte_carlo })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        UgvConfig::default().validate().unwrap();
        assert!(UgvConfig { mc_trials: 1, ..Default::default() }.validate().is_err());
        assert!(UgvConfig { sigma: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn start_pose_places_the_tags() {
        let c = UgvConfig { steps: 0, mc_trials: 0, ..Default::default() };
        let t = run_ugv_scenario(&c).unwrap();
        let p = &t.steps[0].positions;
        let (s, co) = c.start_heading.sin_cos();
        assert!((p[0][0] - (-15.0 + co)).abs() < 1e-12 && (p[0][1] - (-4.0 + s)).abs() < 1e-12);
        assert!((p[1][0] - (-15.0 - co)).abs() < 1e-12);
        assert_eq!(p[2], vec![-5.0, 5.0]);
    }
}
