use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Quadrature or sampling too coarse for the requested accuracy.
    #[error("resolution refused: {0}")]
    Resolution(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("iteration diverged: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
