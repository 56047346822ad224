use thiserror::Error;

/// Errors produced by the simulator and the analytic toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tick {tick} is outside the retained window [{oldest}, {newest}]")]
    WindowUnderflow { tick: i64, oldest: i64, newest: i64 },

    #[error("window width {width} exceeds retained depth {depth}")]
    WindowTooWide { width: usize, depth: usize },

    #[error("simulation horizon of {horizon} ticks exceeded")]
    HorizonExceeded { horizon: u64 },

    #[error("averaging window of {window} ticks runs past the trajectory end ({len} ticks)")]
    TruncatedWindow { window: usize, len: usize },

    #[error("network has no edges")]
    NoEdges,

    #[error("{value} days is not representable on a grid of {resolution} ticks per day")]
    NotTickRepresentable { value: f64, resolution: u32 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("formula used outside its regime: {0}")]
    InvalidRegime(String),

    #[error("reference oracle cap exceeded: {0}")]
    OracleCap(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
