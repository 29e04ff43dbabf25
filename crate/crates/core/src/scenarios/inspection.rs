use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::boxes::{repulsive_box_gradient, BoundingBox};
use super::control::{pi_velocity_controller, ControllerGains, PiController};
use super::kinematics::{monocycle_step, RobotState};
use super::trace::{ScenarioKind, ScenarioTrace, TraceStep};
use crate::error::{Error, Result};
use crate::estimation::{ls_localize, monte_carlo, sample_measurements, EstimatorKind, LsOptions, StepInstance};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::geometry::{build_graph, Configuration, NodeId, RangingGraph};
use crate::potentials::{descent_step, potential_gradient, potential_value, GradientField, PotentialKind};

/// Two tags climb a structure of width `width` while three anchors
/// reposition themselves to minimise a localizability potential (D-optimal
/// by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InspectionConfig {
    /// Localizability potential the anchors descend.
    pub potential: PotentialKind,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub k_l: f64,
    pub k_c: f64,
    /// Largest anchor displacement per planning step.
    pub step_cap: f64,
    /// Structure width L.
    pub width: f64,
    /// Structure height H; waypoints stop there.
    pub height: f64,
    /// Vertical waypoint spacing a.
    pub spacing: f64,
    pub steps: usize,
    pub tag_start: Vec<[f64; 2]>,
    pub anchor_start: Vec<[f64; 2]>,
    pub boxes: Vec<BoundingBox>,
    /// Waypoints are kept this far inside their box.
    pub box_margin: f64,
    /// Transceiver offset (alpha, beta) on every robot.
    pub offset: [f64; 2],
    pub initial_heading: f64,
    pub gains: ControllerGains,
    pub dt: f64,
    pub dt_max: f64,
    /// Simulated time between two planning steps.
    pub planning_period: f64,
    /// Plan on one-shot least-squares estimates of the tags instead of the truth.
    pub plan_on_estimates: bool,
    /// Monte Carlo every `mc_every` steps (and at the last step); 0 disables it.
    pub mc_every: usize,
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for InspectionConfig {
    fn default() -> Self {
        let d_s = 1.5;
        Self {
            potential: PotentialKind::DOpt,
            sigma: 0.1,
            noise: NoiseKind::Additive,
            k_l: 2.0,
            k_c: 0.01,
            step_cap: 0.2,
            width: 6.0,
            height: 10.0,
            spacing: 0.1,
            steps: 100,
            tag_start: vec![[1.0, -0.5], [5.0, -0.5]],
            anchor_start: vec![[-2.0, 0.0], [-1.5, 0.0], [8.0, 0.0]],
            boxes: vec![
                BoundingBox { lower: [-6.0, -3.0], upper: [-0.5, 12.0], d_s },
                BoundingBox { lower: [-4.0, -6.0], upper: [10.0, 0.5], d_s },
                BoundingBox { lower: [6.5, -3.0], upper: [12.0, 12.0], d_s },
            ],
            box_margin: 0.05,
            offset: [0.5, 0.5],
            initial_heading: std::f64::consts::FRAC_PI_2,
            gains: ControllerGains::default(),
            dt: 0.05,
            dt_max: 0.01,
            planning_period: 1.0,
            plan_on_estimates: false,
            mc_every: 5,
            mc_trials: 100,
            seed: 0,
        }
    }
}

impl InspectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.k_l < 0.0 || self.k_c < 0.0 || !(self.step_cap > 0.0) {
            return bad("k_l, k_c must be non-negative and step_cap positive".into());
        }
        if self.tag_start.len() != 2 {
            return bad(format!("the inspection run uses 2 tags, got {}", self.tag_start.len()));
        }
        if self.anchor_start.len() < 2 || self.boxes.len() != self.anchor_start.len() {
            return bad("need at least 2 anchors and one box per anchor".into());
        }
        for (i, (b, p)) in self.boxes.iter().zip(&self.anchor_start).enumerate() {
            BoundingBox::new(b.lower, b.upper, b.d_s)?;
            if !b.contains(*p) {
                return bad(format!("anchor {i} starts outside its box"));
            }
        }
        if self.offset[0] == 0.0 {
            return bad("transceiver offset alpha must be nonzero".into());
        }
        if !(self.dt > 0.0 && self.dt_max > 0.0 && self.planning_period >= self.dt) {
            return bad("need dt > 0, dt_max > 0 and planning_period >= dt".into());
        }
        if !(self.spacing > 0.0) || self.spacing * self.steps as f64 > self.height + 1e-9 {
            return bad(format!(
                "{} waypoints of spacing {} exceed the height {}",
                self.steps, self.spacing, self.height
            ));
        }
        if self.mc_every > 0 && self.mc_trials < 2 {
            return bad("mc_trials must be at least 2".into());
        }
        NoiseModel::new(self.noise, self.sigma)?;
        PiController::new(self.gains)?;
        Ok(())
    }

    /// Waypoint `l` of tag `k` (l = 0 is the start position).
    pub fn tag_waypoint(&self, k: usize, l: usize) -> [f64; 2] {
        if l == 0 {
            return self.tag_start[k];
        }
        let x = self.width * (k + 1) as f64 / 3.0;
        [x, self.spacing * l as f64]
    }

    pub fn node_count(&self) -> usize {
        self.tag_start.len() + self.anchor_start.len()
    }
}

/// Every tag ranges with every other node.
pub(crate) fn complete_graph(tags: usize, anchors: usize) -> Result<RangingGraph> {
    let n = tags + anchors;
    let pairs: Vec<(usize, usize)> = (0..tags).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    build_graph(2, tags, anchors, &pairs)
}

pub(crate) fn configuration(robots: &[RobotState], k: usize) -> Result<Configuration> {
    let pts: Vec<Vec<f64>> = robots.iter().map(|r| r.transceiver(k).to_vec()).collect();
    Configuration::from_points(2, &pts)
}

fn barrier(cfg: &InspectionConfig, config: &Configuration, u: usize) -> Result<(f64, Vec<[f64; 2]>)> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(cfg.boxes.len());
    for (a, b) in cfg.boxes.iter().enumerate() {
        let p = config.point(u + a);
        let (v, g) = repulsive_box_gradient([p[0], p[1]], b)?;
        total += v;
        grads.push(g);
    }
    Ok((total, grads))
}

fn estimate_tags(
    graph: &RangingGraph,
    truth: &Configuration,
    noise: &NoiseModel,
    seed: u64,
    step: usize,
) -> Result<Configuration> {
    let mut rng = crate::estimation::trial_rng(seed ^ 0x5_eed0_fe57, step, 0);
    let meas = sample_measurements(graph, truth, noise, &mut rng)?;
    let u = graph.tag_count();
    let est = ls_localize(graph, truth, &meas, &truth.head(u), &LsOptions::default())?;
    let mut out = truth.clone();
    out.set_head(&est.positions);
    Ok(out)
}

pub fn run_inspection_scenario(cfg: &InspectionConfig) -> Result<ScenarioTrace> {
    cfg.validate()?;
    let u = cfg.tag_start.len();
    let k_anchors = cfg.anchor_start.len();
    let noise = NoiseModel::new(cfg.noise, cfg.sigma)?;
    let graph = complete_graph(u, k_anchors)?;
    let anchors: Vec<usize> = (u..u + k_anchors).collect();

    let mut robots: Vec<RobotState> = cfg
        .tag_start
        .iter()
        .chain(&cfg.anchor_start)
        .map(|&p| RobotState::with_transceiver_at(p, cfg.initial_heading, vec![cfg.offset], 0))
        .collect();
    let mut controllers = vec![PiController::new(cfg.gains)?; robots.len()];
    let mut waypoints: Vec<[f64; 2]> = cfg.tag_start.iter().chain(&cfg.anchor_start).copied().collect();

    let mut steps = Vec::with_capacity(cfg.steps + 1);
    let mut instances = Vec::new();
    let mut mc_steps = Vec::new();
    let mut tracking_error = 0.0;
    for k in 0..=cfg.steps {
        let config = configuration(&robots, 0)?;
        let (j_con, box_grads) = barrier(cfg, &config, u)?;
        let f_u = crate::fisher::fim(&graph, &config, &noise)?.tag_block();
        let (potential, mut diagnostic) = match potential_value(cfg.potential, &f_u) {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        steps.push(TraceStep {
            step: k,
            positions: config.points(),
            headings: robots.iter().map(|r| r.theta).collect(),
            potential,
            j_con,
            constraint_residual: 0.0,
            tracking_error,
            diagnostic: None,
        });
        if cfg.mc_every > 0 && (k % cfg.mc_every == 0 || k == cfg.steps) {
            instances.push(StepInstance { graph: graph.clone(), config: config.clone(), bodies: None });
            mc_steps.push(k);
        }
        if k == cfg.steps {
            break;
        }

        // Plan the next waypoints.
        let plan_config =
            if cfg.plan_on_estimates { estimate_tags(&graph, &config, &noise, cfg.seed, k)? } else { config.clone() };
        let previous = waypoints.clone();
        for (t, w) in waypoints.iter_mut().enumerate().take(u) {
            *w = cfg.tag_waypoint(t, k + 1);
        }
        let field = if diagnostic.is_none() {
            match potential_gradient(cfg.potential, &graph, &plan_config, &noise, &anchors) {
                Ok(f) => Some(f),
                Err(e) => {
                    diagnostic = Some(e.to_string());
                    None
                }
            }
        } else {
            None
        };
        let mut combined = GradientField { value: cfg.k_l * potential + cfg.k_c * j_con, ..Default::default() };
        for (a, &node) in anchors.iter().enumerate() {
            let mut g = DVector::from_column_slice(&box_grads[a]) * cfg.k_c;
            if let Some(f) = &field {
                g += f.get(node).expect("anchor gradient") * cfg.k_l;
            }
            combined.entries.insert(NodeId(node), g);
        }
        let target = descent_step(&config, &combined, 1.0, cfg.step_cap);
        for (a, &node) in anchors.iter().enumerate() {
            let p = target.point(node);
            waypoints[node] = cfg.boxes[a].clamp([p[0], p[1]], cfg.box_margin);
        }
        steps[k].diagnostic = diagnostic;

        // Track the waypoints with ramped references.
        let ticks = (cfg.planning_period / cfg.dt).round() as usize;
        for tick in 1..=ticks {
            let s = tick as f64 / ticks as f64;
            for (r, robot) in robots.iter_mut().enumerate() {
                let reference = [
                    previous[r][0] + s * (waypoints[r][0] - previous[r][0]),
                    previous[r][1] + s * (waypoints[r][1] - previous[r][1]),
                ];
                let (v, w) = pi_velocity_controller(&mut controllers[r], robot, 0, reference, cfg.dt)?;
                *robot = monocycle_step(robot, v, w, cfg.dt, cfg.dt_max)?;
            }
        }
        tracking_error = robots
            .iter()
            .zip(&waypoints)
            .map(|(r, w)| {
                let p = r.transceiver(0);
                (p[0] - w[0]).hypot(p[1] - w[1])
            })
            .fold(0.0, f64::max);
    }

    let monte_carlo = if instances.is_empty() {
        None
    } else {
        let mut mc = monte_carlo(
            &instances,
            EstimatorKind::Unconstrained,
            &noise,
            cfg.mc_trials,
            cfg.seed,
            &LsOptions::default(),
        )?;
        for (s, &k) in mc.steps.iter_mut().zip(&mc_steps) {
            s.step = k;
        }
        Some(mc)
    };
    Ok(ScenarioTrace { scenario: ScenarioKind::Inspection, mode: None, dim: 2, steps, monte_carlo })
}
