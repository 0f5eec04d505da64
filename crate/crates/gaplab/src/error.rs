use thiserror::Error;

/// Crate-wide error type.  Variants map onto the CLI exit codes: config
/// errors exit 2, numerical errors exit 3, output errors exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    /// Invalid domain data: parameter out of range, point outside the
    /// domain, curvature of the wrong sign.
    #[error("domain error: {0}")]
    Domain(String),

    /// A solver failed to converge, an inertia count disagreed with the
    /// number of computed eigenvalues, or an assumption of a numerical
    /// routine (simple eigenvalues, non-negative operators) was violated.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("output error: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn output(msg: impl Into<String>) -> Self {
        Error::Output(msg.into())
    }
}
