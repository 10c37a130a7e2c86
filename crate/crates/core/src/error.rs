use thiserror::Error;

use crate::control::FeasibilityReport;

/// Errors raised by the library. Agent indices carried here are 0-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must contain at least one agent")]
    EmptyGraph,

    #[error("agent index {index} out of range for a graph of {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("edge ({0}, {0}) is a loop; declare self-influence as a self-loop instead")]
    LoopEdge(usize),

    #[error("communication graph is disconnected ({reached} of {n} agents reachable from agent 0)")]
    DisconnectedGraph { reached: usize, n: usize },

    #[error("weight at ({i}, {j}) lies outside the edge set")]
    WeightOutsideEdgeSet { i: usize, j: usize },

    #[error("weight at ({i}, {j}) is negative ({value})")]
    NegativeWeight { i: usize, j: usize, value: f64 },

    #[error("weight at ({i}, {j}) is not finite")]
    NonFiniteWeight { i: usize, j: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("influence matrix is identically zero")]
    ZeroMatrix,

    #[error("attenuation must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("alpha * spectral radius = {product} violates the convergence assumption (must be < 1)")]
    AssumptionViolated { product: f64 },

    #[error("seed vector must be nonnegative with at least one positive entry")]
    InvalidSeed,

    #[error("epsilon {epsilon} is not admissible (maximum degree {max_degree}, second eigenvalue modulus {lambda2})")]
    EpsilonTooLarge {
        epsilon: f64,
        max_degree: usize,
        lambda2: f64,
    },

    #[error("iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("contraction factor kappa = {0} is not below one")]
    KappaNotLessThanOne(f64),

    #[error("centrality vector must be nonnegative and nonzero")]
    ZeroCentralityVector,

    #[error("max rounds ({rounds}) exceeded with residual {residual:e}")]
    MaxRoundsExceeded { rounds: usize, residual: f64 },

    #[error("invalid control instance: {0}")]
    InvalidInstance(String),

    #[error("target centrality is infeasible within the weight bounds: {0}")]
    InfeasibleTarget(FeasibilityReport),

    #[error("no partition of the neighborhood of agent {node} satisfies the optimality conditions")]
    NoValidPartition { node: usize },

    #[error("neighborhood of agent {node} has {size} entries, enumeration limit is {limit}")]
    NeighborhoodTooLarge {
        node: usize,
        size: usize,
        limit: usize,
    },

    #[error("centrality constraint residual {residual:e} exceeds tolerance {tolerance:e}")]
    ConstraintResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("simulation failed at round {round}: {source}")]
    Simulation {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
