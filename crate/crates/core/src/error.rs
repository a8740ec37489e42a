use thiserror::Error;

/// Errors reported by the engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },

    #[error("integration budget of {evals} evaluations exhausted (estimate {value}, error {error})")]
    BudgetExhausted { evals: usize, value: f64, error: f64 },

    #[error("hypergeometric parameter c = {0} is a non-positive integer")]
    ParameterPole(f64),

    #[error("series did not converge after {terms} terms")]
    NonConvergence { terms: usize },

    #[error("zero throughput: energy per packet is infinite")]
    ZeroThroughput,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
