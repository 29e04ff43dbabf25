//! Robot kinematics, tracking controllers, box barriers and the two
//! deployment scenarios.

mod boxes;
mod control;
mod inspection;
mod kinematics;
mod trace;
mod ugv;

pub use boxes::{repulsive_box_gradient, BoundingBox};
pub use control::{
    pi_velocity_controller, velocity_to_unicycle, wrap_angle, ControllerGains, PiController, PoseController,
};
pub use inspection::{run_inspection_scenario, InspectionConfig};
pub use kinematics::{monocycle_step, RobotState};
pub use trace::{MseEntry, ScenarioKind, ScenarioSummary, ScenarioTrace, TraceStep, TRACE_COLUMNS};
pub use ugv::{run_ugv_scenario, UgvConfig};
