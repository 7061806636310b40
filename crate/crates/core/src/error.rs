use thiserror::Error;

use crate::screening::OrderRelation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),

    #[error("non-finite value {value} at grid index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{value} is not a multiple of the grid step {step}")]
    Alignment { value: f64, step: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid tolerance (abs_tol = {abs_tol}, rel_tol = {rel_tol})")]
    InvalidTolerance { abs_tol: f64, rel_tol: f64 },

    #[error("evaluation failed at grid index {index} (t = {t}): {reason}")]
    Evaluation {
        index: usize,
        t: f64,
        reason: String,
    },

    #[error("rule is not optimal at t = {t} (grid index {index}): a candidate gains {gain}")]
    NotOptimal { index: usize, t: f64, gain: f64 },

    #[error("payoff never reaches {target} at t = {t} after {doublings} bracket doublings")]
    NotOnto { target: f64, t: f64, doublings: u32 },

    #[error("payoff is not strictly decreasing in the payment at t = {t}: f({p_lo}) <= f({p_hi})")]
    NotDecreasing { t: f64, p_lo: f64, p_hi: f64 },

    #[error("type derivative {value} exceeds its bound {bound} at t = {t}")]
    ModelViolation { t: f64, value: f64, bound: f64 },

    #[error(
        "allocation is not increasing: outcome at index {lower} vs index {upper} is {relation:?}"
    )]
    NotIncreasing {
        lower: usize,
        upper: usize,
        relation: OrderRelation,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid scenario: {0}")]
    Config(String),
}
