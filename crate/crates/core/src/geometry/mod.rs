//! Ranging graphs, configurations, rigidity and triangulation placement.

mod config;
mod graph;
mod rigidity;
mod triangulation;

pub use config::Configuration;
pub use graph::{build_graph, incidence_matrix, EdgeKind, NodeId, RangingGraph};
pub(crate) use rigidity::ensure_compatible;
pub use rigidity::{
    euclidean_motion_basis, is_infinitesimally_rigid, rigidity_function, rigidity_matrix, MotionBasis, DEFAULT_RANK_TOL,
};
pub use triangulation::{build_triangulation, simplex_measure, Region};
