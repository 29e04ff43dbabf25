use serde::{Deserialize, Serialize};

use crate::constrained::ConstraintKind;
use crate::error::{Error, Result};
use crate::estimation::{StepStats, TrialStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Inspection,
    Ugv,
}

/// Network state after one planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Position of every node (tags first).
    pub positions: Vec<Vec<f64>>,
    /// Heading of every simulated robot.
    pub headings: Vec<f64>,
    /// J_D for the inspection run, J_c for the UGV run; NaN when F_U was singular.
    pub potential: f64,
    /// Box barrier term (inspection only, zero otherwise).
    pub j_con: f64,
    /// Norm of the rigid-body constraint residual (UGV only, zero otherwise).
    pub constraint_residual: f64,
    /// Largest distance between a node and its current waypoint.
    pub tracking_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ConstraintKind>,
    pub dim: usize,
    pub steps: Vec<TraceStep>,
    /// Monte Carlo statistics; `step` fields refer to planning steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<TrialStats>,
}

/// Columns of the per-node trace CSV (2D runs; 3D adds `z` after `y`).
pub const TRACE_COLUMNS: [&str; 8] =
    ["step", "node", "x", "y", "potential", "j_con", "constraint_residual", "tracking_error"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseEntry {
    pub step: usize,
    pub mse: f64,
    pub b_minus: f64,
    pub b_plus: f64,
    /// Per-tag MSE in tag order.
    pub per_tag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ConstraintKind>,
    pub steps: usize,
    pub initial_potential: f64,
    pub final_potential: f64,
    pub potential_decreased: bool,
    pub max_tracking_error: f64,
    pub final_constraint_residual: f64,
    pub mse: Vec<MseEntry>,
    pub diagnostics: Vec<String>,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("csv: {e}"))
}

impl ScenarioTrace {
    pub fn first(&self) -> &TraceStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &TraceStep {
        &self.steps[self.steps.len() - 1]
    }

    pub fn mc_at(&self, step: usize) -> Option<&StepStats> {
        self.monte_carlo.as_ref()?.steps.iter().find(|s| s.step == step)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = TRACE_COLUMNS.to_vec();
        if self.dim == 3 {
            header.insert(4, "z");
        }
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.steps {
            for (node, p) in s.positions.iter().enumerate() {
                let mut rec = vec![s.step.to_string(), node.to_string()];
                rec.extend(p.iter().map(|v| v.to_string()));
                for v in [s.potential, s.j_con, s.constraint_residual, s.tracking_error] {
                    rec.push(v.to_string());
                }
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
    }

    /// Potential against step, one row per step.
    pub fn potential_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "potential", "j_con", "constraint_residual", "tracking_error"]).map_err(csv_err)?;
        for s in &self.steps {
            w.write_record(&[
                s.step.to_string(),
                s.potential.to_string(),
                s.j_con.to_string(),
                s.constraint_residual.to_string(),
                s.tracking_error.to_string(),
            ])
            .map_err(csv_err)?;
        }
        String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
    }

    /// `transient` initial steps are ignored in the tracking-error maximum.
    pub fn summary(&self, transient: usize) -> ScenarioSummary {
        let mse = self
            .monte_carlo
            .iter()
            .flat_map(|mc| mc.steps.iter())
            .map(|s| MseEntry {
                step: s.step,
                mse: s.mean.mse,
                b_minus: s.mean.b_minus,
                b_plus: s.mean.b_plus,
                per_tag: s.tags.iter().map(|t| t.stats.mse).collect(),
            })
            .collect();
        let (p0, pf) = (self.first().potential, self.last().potential);
        ScenarioSummary {
            scenario: self.scenario,
            mode: self.mode,
            steps: self.steps.len() - 1,
            initial_potential: p0,
            final_potential: pf,
            potential_decreased: pf < p0,
            max_tracking_error: self.steps.iter().skip(transient).map(|s| s.tracking_error).fold(0.0, f64::max),
            final_constraint_residual: self.last().constraint_residual,
            mse,
            diagnostics: self
                .steps
                .iter()
                .filter_map(|s| s.diagnostic.as_ref().map(|d| format!("step {}: {d}", s.step)))
                .collect(),
        }
    }
}
