use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: eps-order {needed} required but only available up to {available}")]
    WindowShortfall { what: String, needed: i64, available: i64 },

    #[error("{what}: {needed} moments requested but capacity is {available} (short by {})", needed - available)]
    CapacityShortfall {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("component f{component}, eps-order {layer}: {required} initial values required, {provided} provided")]
    InitShortfall {
        component: usize,
        layer: i64,
        required: usize,
        provided: usize,
    },

    #[error("component f{component}, eps-order {layer}: initial value at index {index} conflicts with the recurrence")]
    InitInconsistent {
        component: usize,
        layer: i64,
        index: usize,
    },

    #[error("{what}: stream too short, {extra} more moments needed")]
    InsufficientLength { what: String, extra: usize },

    #[error("singular at expansion point: {0}")]
    Singular(String),

    #[error("coefficient not expandable at x = 0, eps = 0: {0}")]
    NonExpandable(String),

    #[error("insufficient moments: {needed} needed, {available} available")]
    InsufficientMoments { needed: usize, available: usize },

    #[error("recurrence hash mismatch: file has {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable class used for CLI exit statuses.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Degenerate(_) => "degenerate",
            Error::DivisionByZero(_) => "division-by-zero",
            Error::Parse { .. } => "parse-error",
            Error::InvalidSystem(_) => "invalid-system",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::WindowShortfall { .. } => "window-shortfall",
            Error::CapacityShortfall { .. } => "capacity-shortfall",
            Error::InitShortfall { .. } => "init-shortfall",
            Error::InitInconsistent { .. } => "init-inconsistent",
            Error::InsufficientLength { .. } => "insufficient-length",
            Error::Singular(_) => "singular-point",
            Error::NonExpandable(_) => "non-expandable",
            Error::InsufficientMoments { .. } => "insufficient-moments",
            Error::HashMismatch { .. } => "hash-mismatch",
            Error::OracleMismatch(_) => "oracle-mismatch",
            Error::Io { .. } => "io-error",
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
