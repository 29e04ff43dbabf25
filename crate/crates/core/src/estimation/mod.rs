//! Range sampling, least-squares localization and Monte Carlo statistics.

mod gauss_newton;
mod ls;
mod measurements;
mod montecarlo;

pub use gauss_newton::{gauss_newton, GnResult};
pub use ls::{
    ls_cost, ls_localize, ls_localize_distance_constrained, ls_localize_rp_constrained, LsEstimate, LsOptions,
};
pub use measurements::{sample_measurements, MeasurementSet};
pub(crate) use montecarlo::trial_rng;
pub use montecarlo::{monte_carlo, ErrorStats, EstimatorKind, StepInstance, StepStats, TagStats, TrialStats};
