use thiserror::Error;

/// Errors raised by the model evaluators, simulators, analytics and parsers.
#[derive(Debug, Error)]
pub enum VoaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Convergence { tolerance: f64, estimate: f64 },

    #[error("maximizer reached the search bound {upper}; widen the interval")]
    SearchBound { upper: f64 },

    #[error("index {index} out of range for {len} posts")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate post id `{id}` at line {line}")]
    DuplicateId { id: String, line: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VoaError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        VoaError::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VoaError::InvalidData(msg.into())
    }

    /// Process exit status used by the `voa` binary. Usage errors use 2 (clap).
    pub fn exit_code(&self) -> i32 {
        match self {
            VoaError::Domain(_) => 3,
            VoaError::Convergence { .. } | VoaError::SearchBound { .. } => 4,
            VoaError::Parse { .. } | VoaError::DuplicateId { .. } => 5,
            VoaError::IndexOutOfRange { .. } | VoaError::Empty(_) | VoaError::InvalidData(_) => 6,
            VoaError::Io(_) => 7,
        }
    }
}

pub type Result<T, E = VoaError> = std::result::Result<T, E>;
