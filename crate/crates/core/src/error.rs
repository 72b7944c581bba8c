use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The series hit `k_max` while the accumulated weight was still short of
    /// `1 - mass_epsilon`.
    #[error("series did not converge: {terms_used} terms, mass covered {mass_covered:e}")]
    NonConvergence { terms_used: u64, mass_covered: f64 },

    #[error("function {0} has unbounded non-polynomial growth")]
    UnboundedGrowth(String),

    #[error("function {function} has no analytic derivative of order {order}")]
    MissingDerivative { function: String, order: u8 },

    #[error("unsupported moment order {0}")]
    UnsupportedOrder(u32),

    #[error("K-functional candidate family is empty")]
    EmptyCandidateFamily,
}
