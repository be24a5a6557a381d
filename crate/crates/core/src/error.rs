use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step index must be >= 1 (steps are 1-indexed), got {0}")]
    ZeroIndex(u64),

    #[error("step index {index} is beyond the {len} tabulated steps of a custom schedule")]
    BeyondTable { index: u64, len: usize },

    #[error("S_n overflowed at n = {n}")]
    Overflow { n: u64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("schedule is not square-summable; the stopping bound needs a finite tail of squared steps")]
    InapplicableSchedule,

    #[error("fixed-point iteration did not reach residual {tol:e} within {max_iter} sweeps (last residual {residual:e})")]
    MaxIterExceeded {
        max_iter: usize,
        tol: f64,
        residual: f64,
    },

    #[error("solution decreases by {drop:e} at x = {x} (allowed {allowed:e})")]
    MonotonicityViolation { x: f64, drop: f64, allowed: f64 },

    #[error("Neumann series term {last_term:e} did not fall below {tol:e} within depth {depth}")]
    NonConvergence {
        depth: usize,
        tol: f64,
        last_term: f64,
    },

    #[error("state left [0, 1]: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks that `value` lies in the closed unit interval.
pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(invalid(name, format!("{value} is outside [0, 1]")))
    }
}

/// Checks that `value` lies in the open unit interval.
pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{value} is outside (0, 1)")))
    }
}
