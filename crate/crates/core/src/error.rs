use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::eigen::EigenSolution;
use crate::model::RowViolation;
use crate::variational::MaximizeOutcome;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("kernel is not stochastic: {} row(s) outside tolerance", violations.len())]
    NotStochastic { violations: Vec<RowViolation> },

    #[error("weight ({x},{u},{y}) = {value} is not a finite nonnegative number")]
    InvalidWeight {
        x: usize,
        u: usize,
        y: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("vertex {vertex} has out-degree 0 in graph {graph}")]
    DanglingVertex { graph: usize, vertex: usize },

    #[error("wealth factor is not positive at state {x}, action {action}, next state {y}")]
    NonpositiveWealthFactor { x: usize, action: usize, y: usize },

    #[error("normalizing sum vanishes at state {x}, action {action}")]
    ZeroDenominator { x: usize, action: usize },

    #[error("state {state} exits with certainty under action {action}")]
    CertainExit { state: usize, action: usize },

    #[error("value function entry {index} is not strictly positive")]
    NonpositiveF { index: usize },

    #[error(
        "power iteration did not converge after {} iterations (bracket [{}, {}])",
        .0.iterations, .0.cw_lower, .0.cw_upper
    )]
    NoConvergence(Box<EigenSolution>),

    #[error("gain graph is not irreducible; supply an epsilon fallback to regularize")]
    ReducibleGain,

    #[error("{count} deterministic policies exceed the enumeration cap {cap}")]
    TooManyPolicies { count: u128, cap: u128 },

    #[error("not a probability vector (sum = {sum})")]
    NotDistribution { sum: f64 },

    #[error("eigen solution is not converged")]
    NotConverged,

    #[error("twisted kernel row {state} sums to {sum}, expected 1")]
    RowSumViolation { state: usize, sum: f64 },

    #[error("induced chain has no unique stationary distribution")]
    SingularChain,

    #[error(
        "variational maximizer did not converge (best value {}, residual {:e})",
        .0.value, .0.iterate_residual
    )]
    MaximizerNoConvergence(Box<MaximizeOutcome>),

    #[error("state {state} has zero gain; dual bound is +inf")]
    DeadState { state: usize },

    #[error("(state {x}, action {u}) has zero gain and epsilon is 0")]
    ZeroGainRow { x: usize, u: usize },

    #[error("every sampled path has zero product")]
    AllPathsDead,
}

pub type Result<T> = core::result::Result<T, Error>;
