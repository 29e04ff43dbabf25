//! TOML scenario configuration. Every field has a default, so an empty file
//! is a complete configuration; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constrained::{ArmijoParams, ConstraintKind};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::potentials::PotentialKind;
use crate::scenarios::{BoundingBox, ControllerGains, InspectionConfig, PoseController, ScenarioKind, UgvConfig};
use crate::verify::{DistributedSettings, Fault, SuiteOptions};

/// A configuration problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub noise: NoiseSection,
    pub network: NetworkSection,
    pub potential: PotentialSection,
    pub distributed: DistributedSettings,
    pub constraints: ConstraintSection,
    pub scenario: ScenarioSection,
    pub montecarlo: MonteCarloSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { kind: NoiseKind::Additive, sigma: 0.1 }
    }
}

/// Sizes of the random networks drawn by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub max_nodes: usize,
    pub max_distributed_nodes: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let o = SuiteOptions::default();
        Self { max_nodes: o.max_nodes, max_distributed_nodes: o.max_distributed_nodes }
    }
}

/// Inspection planner: anchors descend k_l J + k_c J_con.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub k_l: f64,
    pub k_c: f64,
    pub step_cap: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        let d = InspectionConfig::default();
        Self { kind: d.potential, k_l: d.k_l, k_c: d.k_c, step_cap: d.step_cap }
    }
}

/// UGV planner: primal-dual descent on the constrained potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub mode: ConstraintKind,
    pub delta: f64,
    pub armijo: ArmijoParams,
    pub normalize: bool,
    pub step_cap: f64,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        let d = UgvConfig::default();
        Self { mode: d.mode, delta: d.delta, armijo: d.armijo, normalize: d.normalize, step_cap: d.step_cap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub which: ScenarioKind,
    pub steps: usize,
    pub dt: f64,
    pub dt_max: f64,
    pub planning_period: f64,
    pub inspection: InspectionSetup,
    pub ugv: UgvSetup,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let d = InspectionConfig::default();
        Self {
            which: ScenarioKind::Inspection,
            steps: d.steps,
            dt: d.dt,
            dt_max: d.dt_max,
            planning_period: d.planning_period,
            inspection: InspectionSetup::default(),
            ugv: UgvSetup::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InspectionSetup {
    pub width: f64,
    pub height: f64,
    pub spacing: f64,
    pub tag_start: Vec<[f64; 2]>,
    pub anchor_start: Vec<[f64; 2]>,
    pub boxes: Vec<BoundingBox>,
    pub box_margin: f64,
    pub offset: [f64; 2],
    pub initial_heading: f64,
    pub gains: ControllerGains,
    pub plan_on_estimates: bool,
}

impl Default for InspectionSetup {
    fn default() -> Self {
        let d = InspectionConfig::default();
        Self {
            width: d.width,
            height: d.height,
            spacing: d.spacing,
            tag_start: d.tag_start,
            anchor_start: d.anchor_start,
            boxes: d.boxes,
            box_margin: d.box_margin,
            offset: d.offset,
            initial_heading: d.initial_heading,
            gains: d.gains,
            plan_on_estimates: d.plan_on_estimates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UgvSetup {
    pub tag_offsets: Vec<[f64; 2]>,
    pub anchors: Vec<[f64; 2]>,
    pub start_position: [f64; 2],
    pub start_heading: f64,
    pub pose: PoseController,
}

impl Default for UgvSetup {
    fn default() -> Self {
        let d = UgvConfig::default();
        Self {
            tag_offsets: d.tag_offsets,
            anchors: d.anchors,
            start_position: d.start_position,
            start_heading: d.start_heading,
            pose: d.pose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    /// Trials per Monte Carlo step during `run` (0 disables it).
    pub trials: usize,
    /// Inspection runs estimate every `every` steps and at the last one.
    pub every: usize,
    /// Trials per step of the `montecarlo` command.
    pub table_trials: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { trials: 100, every: 5, table_trials: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub instances: usize,
    pub power_instances: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        let o = SuiteOptions::default();
        Self { instances: o.instances, power_instances: o.power_instances }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn check(ok: bool, path: &str, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(path, message))
    }
}

impl ScenarioConfig {
    /// Parses TOML text; errors name the offending field.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("", e.to_string().trim_end()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            ConfigError::new(path, e.into_inner().message().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.noise;
        check(n.sigma.is_finite() && n.sigma > 0.0, "noise.sigma", "must be positive")?;
        NoiseModel::new(n.kind, n.sigma).map_err(|e| ConfigError::new("noise", e.to_string()))?;

        check(self.network.max_nodes >= 4, "network.max_nodes", "must be at least 4")?;
        check(self.network.max_distributed_nodes >= 8, "network.max_distributed_nodes", "must be at least 8")?;

        let p = &self.potential;
        check(p.k_l >= 0.0, "potential.k_l", "must be non-negative")?;
        check(p.k_c >= 0.0, "potential.k_c", "must be non-negative")?;
        check(p.step_cap > 0.0, "potential.step_cap", "must be positive")?;

        let d = &self.distributed;
        check(d.eta_fraction > 0.0 && d.eta_fraction < 1.0, "distributed.eta_fraction", "must lie in (0, 1)")?;
        check(d.max_rounds > 0, "distributed.max_rounds", "must be positive")?;
        check(d.tol > 0.0, "distributed.tol", "must be positive")?;
        check(d.power.outer_iters > 0, "distributed.power.outer_iters", "must be positive")?;
        check(d.power.inner_rounds > 0, "distributed.power.inner_rounds", "must be positive")?;
        check(d.power.min_relative_gap >= 0.0, "distributed.power.min_relative_gap", "must be non-negative")?;

        let c = &self.constraints;
        check(c.delta > 0.0, "constraints.delta", "must be positive")?;
        check(c.step_cap >= 0.0, "constraints.step_cap", "must be non-negative")?;
        let a = &c.armijo;
        check(a.initial > 0.0, "constraints.armijo.initial", "must be positive")?;
        check(a.contraction > 0.0 && a.contraction < 1.0, "constraints.armijo.contraction", "must lie in (0, 1)")?;
        check(
            a.sufficient_decrease > 0.0 && a.sufficient_decrease < 1.0,
            "constraints.armijo.sufficient_decrease",
            "must lie in (0, 1)",
        )?;

        let s = &self.scenario;
        check(s.steps > 0, "scenario.steps", "must be positive")?;
        check(s.dt > 0.0, "scenario.dt", "must be positive")?;
        check(s.dt_max > 0.0, "scenario.dt_max", "must be positive")?;
        check(s.planning_period >= s.dt, "scenario.planning_period", "must be at least dt")?;

        let m = &self.montecarlo;
        check(m.trials != 1, "montecarlo.trials", "must be 0 or at least 2")?;
        check(m.table_trials >= 2, "montecarlo.table_trials", "must be at least 2")?;

        check(self.verify.instances > 0, "verify.instances", "must be positive")?;
        check(self.verify.power_instances > 0, "verify.power_instances", "must be positive")?;

        // The scenario builders check the geometry.
        self.inspection_config().validate().map_err(|e| ConfigError::new("scenario.inspection", e.to_string()))?;
        self.ugv_config(self.constraints.mode)
            .validate()
            .map_err(|e| ConfigError::new("scenario.ugv", e.to_string()))?;
        Ok(())
    }

    pub fn inspection_config(&self) -> InspectionConfig {
        let i = &self.scenario.inspection;
        InspectionConfig {
            potential: self.potential.kind,
            sigma: self.noise.sigma,
            noise: self.noise.kind,
            k_l: self.potential.k_l,
            k_c: self.potential.k_c,
            step_cap: self.potential.step_cap,
            width: i.width,
            height: i.height,
            spacing: i.spacing,
            steps: self.scenario.steps,
            tag_start: i.tag_start.clone(),
            anchor_start: i.anchor_start.clone(),
            boxes: i.boxes.clone(),
            box_margin: i.box_margin,
            offset: i.offset,
            initial_heading: i.initial_heading,
            gains: i.gains,
            dt: self.scenario.dt,
            dt_max: self.scenario.dt_max,
            planning_period: self.scenario.planning_period,
            plan_on_estimates: i.plan_on_estimates,
            mc_every: if self.montecarlo.trials == 0 { 0 } else { self.montecarlo.every },
            mc_trials: self.montecarlo.trials,
            seed: self.seed,
        }
    }

    pub fn ugv_config(&self, mode: ConstraintKind) -> UgvConfig {
        let u = &self.scenario.ugv;
        let c = &self.constraints;
        UgvConfig {
            sigma: self.noise.sigma,
            noise: self.noise.kind,
            mode,
            tag_offsets: u.tag_offsets.clone(),
            anchors: u.anchors.clone(),
            start_position: u.start_position,
            start_heading: u.start_heading,
            steps: self.scenario.steps,
            delta: c.delta,
            armijo: c.armijo,
            normalize: c.normalize,
            step_cap: c.step_cap,
            pose: u.pose,
            dt: self.scenario.dt,
            dt_max: self.scenario.dt_max,
            planning_period: self.scenario.planning_period,
            mc_trials: self.montecarlo.trials,
            seed: self.seed,
        }
    }

    pub fn suite_options(&self, fault: Fault) -> SuiteOptions {
        SuiteOptions {
            seed: self.seed,
            instances: self.verify.instances,
            max_nodes: self.network.max_nodes,
            max_distributed_nodes: self.network.max_distributed_nodes,
            power_instances: self.verify.power_instances,
            distributed: self.distributed,
            fault,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.inspection_config(), InspectionConfig::default());
        assert_eq!(cfg.ugv_config(ConstraintKind::DistanceOnly), UgvConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ScenarioConfig { seed: 11, ..Default::default() };
        cfg.scenario.which = ScenarioKind::Ugv;
        cfg.constraints.mode = ConstraintKind::RelativePosition;
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ScenarioConfig::from_toml("[noise]\nsigma = -1.0\n").unwrap_err();
        assert_eq!(e.path, "noise.sigma");
        let e = ScenarioConfig::from_toml("[noise]\nsigmaa = 1.0\n").unwrap_err();
        assert!(e.path.starts_with("noise"), "{e}");
        assert!(e.message.contains("sigmaa"), "{e}");
        let e = ScenarioConfig::from_toml("[scenario]\nsteps = \"ten\"\n").unwrap_err();
        assert_eq!(e.path, "scenario.steps");
        let e = ScenarioConfig::from_toml("[scenario.inspection]\noffset = [0.0, 0.5]\n").unwrap_err();
        assert_eq!(e.path, "scenario.inspection");
    }
}
