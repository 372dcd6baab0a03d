use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog name: {0}")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("chain diverged at t={t}, last finite |x|={norm}")]
    Diverged { t: f64, norm: f64 },
    #[error("ensemble failed: {diverged} of {total} chains diverged")]
    EnsembleDiverged { diverged: usize, total: usize },
    #[error("quadrature truncation did not converge: {0}")]
    Truncation(String),
    #[error("unnormalized measure: {0}")]
    Unnormalized(String),
    #[error("rejection envelope failure: acceptance rate {0:.2e}")]
    EnvelopeFailure(f64),
    #[error("density ratio bound violated: {0}")]
    RatioBound(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
