//! Localizability potentials for range-measuring robot networks: Fisher
//! information and Cramer-Rao bounds, their gradients (centralized,
//! distributed and under rigid-body constraints), least-squares estimation,
//! and two deployment scenarios.

// `!(x > 0.0)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constrained;
pub mod decentral;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod geometry;
pub mod instances;
pub mod linalg;
pub mod potentials;
pub mod scenarios;
pub mod verify;

pub use error::{Error, Result};
