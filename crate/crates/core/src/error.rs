use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation needs an integer number of colors, got q = {0}")]
    UnsupportedSpinSpace(f64),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("field B = {b} is outside the coexistence window (0, {b_plus})")]
    OutsideCriticalWindow { b: f64, b_plus: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("pairing model needs n*d even (n = {n}, d = {d})")]
    InvalidArity { n: usize, d: usize },

    #[error("{what}: size {size} exceeds budget {limit}")]
    BudgetExceeded {
        what: &'static str,
        size: u64,
        limit: u64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("graph is not connected")]
    NotConnected,

    #[error("could not place modification edges after {attempts} attempts")]
    PlacementFailure { attempts: usize },

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("precondition not satisfied: {0}")]
    ConditionUnsatisfied(String),

    #[error("cycle products diverge: (d-1)*lambda2 = {0} >= 1")]
    DivergentRegime(f64),

    #[error("parameters are not on the critical line: {0}")]
    OutsideCriticalLine(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no admissible mixture plan: {0}")]
    PlanFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
