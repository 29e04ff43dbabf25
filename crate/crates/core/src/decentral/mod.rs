//! Synchronous message-passing simulation and the distributed algorithms
//! that run on it.

mod consensus;
mod gradients;
mod local;
mod network;
mod power;
mod solvers;

pub use consensus::{
    consensus_average, discover_components, max_consensus, metropolis_weights, ConsensusResult, ConsensusWeights,
};
pub use gradients::{
    distributed_aopt_gradient, distributed_dopt_gradient, distributed_eopt_gradient, DistributedGradient,
};
pub use local::{broadcast_positions, LocalView};
pub use network::{
    audit_locality, tag_diameter, Envelope, MessageRecord, Outbox, Payload, Protocol, ProtocolRun, RoundNetwork,
    RunOptions, TranscriptMode,
};
pub use power::{degree_spectral_bound, power_iteration_eigvec, EigenEstimate, PowerIterParams};
pub use solvers::{
    default_eta, identity_rhs, jacobi_or_solve, richardson_solve, solve_local, LinearIteration, SolveResult,
    SolverOptions,
};
