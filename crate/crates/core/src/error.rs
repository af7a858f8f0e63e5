//! Error type shared by every module of the crate.
//!
//! Budget overruns are a separate variant so callers (the CLI in particular)
//! can distinguish "inputs too large for the configured caps" from genuine
//! precondition failures.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("not prime: {0}")]
    NotPrime(u64),

    #[error("field too large: {p}^{r} exceeds 2^20")]
    FieldTooLarge { p: u64, r: u32 },

    #[error("irreducibility undefined for degree zero")]
    DegreeZero,

    #[error("division by zero polynomial")]
    DivisionByZero,

    #[error("{0} is not a unit")]
    NotAUnit(String),

    #[error("budget exceeded: {what} = {value} > cap {cap}")]
    Budget {
        what: &'static str,
        value: u128,
        cap: u128,
    },

    #[error("no finite L-polynomial for the trivial character")]
    NoFiniteLPolynomial,

    #[error("completion defined for primitive characters only")]
    CompletionRequiresPrimitive,

    #[error("unexpected trivial-zero structure: remainder magnitude {remainder:e}")]
    TrivialZeroStructure { remainder: f64 },

    #[error("RH violation: inverse root magnitude deviates from sqrt(q) by {deviation:e}")]
    RhViolation { deviation: f64 },

    #[error("explicit formula mismatch: spectrum route {spectrum:?} vs character-sum route {explicit:?} (tol {tol:e})")]
    ExplicitFormulaMismatch {
        spectrum: (f64, f64),
        explicit: (f64, f64),
        tol: f64,
    },

    #[error("involution transfer requires Q(0) ≠ 0")]
    InvolutionTransfer,

    #[error("root finder failed to converge: residual {residual:e}")]
    RootFinder { residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal route disagreement: {0}")]
    RouteDisagreement(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("operands belong to different fields")]
    MismatchedField,
}

impl Error {
    /// True for errors that signal "the requested computation exceeds a
    /// configured size cap" rather than an invalid input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
