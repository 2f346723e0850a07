use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    SvdNonConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("rank-deficient matrix: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures that come from the numerical kernels rather than from
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::SvdNonConvergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::RankDeficient { .. }
        )
    }
}
