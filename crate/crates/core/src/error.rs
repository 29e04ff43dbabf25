use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("coincident nodes {i} and {j} on a ranging edge")]
    SingularGeometry { i: usize, j: usize },

    #[error("matrix is singular or not positive definite (lambda_min = {lambda_min:e})")]
    Singular { lambda_min: f64 },

    #[error("smallest eigenvalue is not simple (gap {gap:e} below tolerance)")]
    RepeatedEigenvalue { gap: f64 },

    #[error("node {0} is not mobile")]
    NotMobile(usize),

    #[error("locality violation: node {from} sent to non-neighbor {to} in round {round}")]
    LocalityViolation { round: usize, from: usize, to: usize },

    #[error("iteration diverged after {rounds} rounds (residual {residual:e})")]
    Divergence { rounds: usize, residual: f64 },

    #[error("no convergence after {rounds} rounds (residual {residual:e})")]
    NonConvergence { rounds: usize, residual: f64 },

    #[error("singular diagonal block at tag {tag}")]
    SingularDiagonal { tag: usize },

    #[error("invalid rigid group: {0}")]
    InvalidGroup(String),

    #[error("line search failed after {backtracks} backtracks")]
    LineSearch { backtracks: usize },

    #[error("estimator failed: {0}")]
    Estimation(String),

    #[error("too many failed trials: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("position {position:?} is outside the bounding box")]
    OutsideBox { position: [f64; 2] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
