use thiserror::Error;

/// Errors produced by the perturbation library.
#[derive(Debug, Error, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// A parameter failed its precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The requested variance lies outside the open interval (0, D(D+1)/3).
    #[error("variance {variance} violates the {bound} bound for D = {d}: admissible range is (0, {upper})")]
    VarianceOutOfRange {
        d: u32,
        variance: f64,
        bound: VarianceBoundSide,
        upper: f64,
    },

    /// Bisection did not meet its residual target within the iteration cap.
    #[error("root finding did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// No support half-width up to `d_max` reaches the target delta.
    #[error("delta target {delta_target:e} unreachable with D <= {d_max}; best delta {best_delta:e} at D = {best_d}")]
    TargetUnreachable {
        delta_target: f64,
        d_max: u32,
        best_d: u32,
        best_delta: f64,
    },

    /// The lookup table cannot realise every value of the support.
    #[error("lookup table for D = {d} at KEYSIZE = 2^{keysize_log2} does not have full support; increase KEYSIZE or adjust the noise parameters")]
    InsufficientSupport { d: u32, keysize_log2: u8 },

    /// The true count is smaller than D, so the perturbed count could be negative.
    #[error("true count {count} is below the support half-width D = {d}; perturbed counts could become negative")]
    CountBelowSupport { count: u64, d: u32 },

    #[error("cell contains no record keys")]
    EmptyCell,

    #[error("parameter grid is empty")]
    EmptyGrid,

    /// A serialised artifact failed to parse or validate.
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
}

/// Which end of the admissible variance interval was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceBoundSide {
    Lower,
    Upper,
}

impl std::fmt::Display for VarianceBoundSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarianceBoundSide::Lower => f.write_str("lower"),
            VarianceBoundSide::Upper => f.write_str("upper"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "epsilon",
            format!("must be finite and > 0, got {epsilon}"),
        ))
    }
}
