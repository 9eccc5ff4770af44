use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("underdetermined word: {needed} coordinates required, {available} available")]
    UnderdeterminedWord { needed: usize, available: usize },

    #[error("eigensolver did not converge at c = {c} after {iterations} sweeps (residual {residual:e})")]
    EigenNonConvergence { c: f64, iterations: usize, residual: f64 },

    #[error(
        "max-plus iteration did not converge after {sweeps} sweeps (span {span:e}); \
         the maximizing set may be near-degenerate, try refining the grid"
    )]
    MaxPlusNonConvergence { sweeps: usize, span: f64 },

    #[error("search guard exceeded: {0}")]
    SearchGuard(String),

    #[error("LDP hypothesis violated: the maximizing measure is not unique on this grid")]
    HypothesisViolated,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
