use thiserror::Error;

/// Errors surfaced by the identification, simulation and I/O layers.
///
/// The taxonomy maps onto the CLI exit codes: contract violations are usage
/// errors, numerical/divergence failures are runtime errors, parse and I/O
/// errors are environment errors.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape mismatch, bad argument).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An iterative kernel failed to converge or internal state is corrupt.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input data is unusable (non-finite values and the like).
    #[error("bad data: {0}")]
    Data(String),

    /// A simulation or rollout produced a non-finite state.
    #[error("diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    /// An error attributed to a specific streamed sample.
    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed text input.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn at_sample(self, index: usize) -> Self {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
