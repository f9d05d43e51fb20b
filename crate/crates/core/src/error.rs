use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("discount rate c = {c} must exceed the risky drift r = {r}; the value function is infinite otherwise")]
    DiscountBelowDrift { c: f64, r: f64 },

    #[error("parameter `{name}` must be positive (got {value})")]
    NonPositiveParam { name: &'static str, value: f64 },

    #[error("invalid claim distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {x} outside the domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("derivative lost positivity at x = {x} (value {deriv})")]
    MonotonicityLost { x: f64, deriv: f64 },

    #[error("HJB residual {residual:.3e} at x = {x} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64, x: f64 },

    #[error("minimum of W' reached at the grid end x_max = {x_max}; enlarge the grid")]
    GridTooShort { x_max: f64 },

    #[error("optimal barrier is dominated by the barrier at y = {y} at x = {x}")]
    BarrierNotMaximal { y: f64, x: f64 },

    #[error("no band bottom found on ({lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("no candidate with at most {max_bands} band(s) passed certification")]
    NoBandCandidate { max_bands: usize },

    #[error("derivative {deriv} < 1 at x = {x}: not a value function")]
    NotAValueFunction { x: f64, deriv: f64 },

    #[error("simulation configuration: {0}")]
    Config(String),

    #[error("policy iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("implicit step failed to converge at x = {x}")]
    StepFailed { x: f64 },
}

impl Error {
    /// Stable variant name, used by the CLI when reporting solver failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DiscountBelowDrift { .. } => "DiscountBelowDrift",
            Error::NonPositiveParam { .. } => "NonPositiveParam",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::Domain { .. } => "Domain",
            Error::MonotonicityLost { .. } => "MonotonicityLost",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::GridTooShort { .. } => "GridTooShort",
            Error::BarrierNotMaximal { .. } => "BarrierNotMaximal",
            Error::NoRoot { .. } => "NoRoot",
            Error::NoBandCandidate { .. } => "NoBandCandidate",
            Error::NotAValueFunction { .. } => "NotAValueFunction",
            Error::Config(_) => "Config",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::StepFailed { .. } => "StepFailed",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
