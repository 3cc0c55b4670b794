use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis function needs velocity samples but none were supplied")]
    MissingVelocity,

    #[error("channel index {index} out of range for {len} channels")]
    ChannelOutOfRange { index: usize, len: usize },

    #[error("singular resolvent at frequency line {line}")]
    SingularAtLine { line: usize },

    #[error("simulation diverged at sample {index}")]
    Divergence { index: usize },

    #[error("implicit output equation did not converge at sample {index}")]
    ImplicitSolve { index: usize },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("modal analysis: {0}")]
    Modal(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format { line, msg: msg.into() }
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_)
            | Error::InvalidArgument(_)
            | Error::MissingVelocity
            | Error::ChannelOutOfRange { .. } => ErrorKind::Usage,
            Error::Format { .. } | Error::Io(_) => ErrorKind::Data,
            Error::SingularAtLine { .. }
            | Error::Divergence { .. }
            | Error::ImplicitSolve { .. }
            | Error::RankDeficient(_)
            | Error::Singular(_)
            | Error::Modal(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}
