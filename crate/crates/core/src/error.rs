use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not connected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("nonpositive or non-finite parameter: {0}")]
    NonpositiveParameter(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("derivation is not antisymmetric on edge {edge}: F(x,y) = {forward}, F(y,x) = {backward}")]
    AntisymmetryViolated { edge: usize, forward: f64, backward: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("solver stopped after {iterations} iterations with relative gap {relative_gap:e}")]
    MaxIterationsExceeded { iterations: usize, relative_gap: f64 },

    #[error("inadmissible test function: {0}")]
    InadmissibleTestFunction(String),

    #[error("interval [{t1}, {t2}] is not inside [0, {horizon}] on grid nodes")]
    IntervalOutOfRange { t1: f64, t2: f64, horizon: f64 },

    #[error("comparison map differs from the datum on the boundary ring at vertex {vertex}, node {node}")]
    RingViolation { vertex: usize, node: usize },

    #[error("data are not ordered at vertex {0}")]
    DataNotOrdered(usize),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("brute force search supports at most 4 variables, got {0}")]
    DimensionTooLarge(usize),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error ({kind}): {message}")]
    Validation { kind: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(kind: &str, message: impl Into<String>) -> Self {
        Error::Validation { kind: kind.to_string(), message: message.into() }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }

    /// Short machine-readable tag used by the command line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DisconnectedGraph { .. } => "DisconnectedGraph",
            Error::NonpositiveParameter(_) => "NonpositiveParameter",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::AntisymmetryViolated { .. } => "AntisymmetryViolated",
            Error::SupportViolation(_) => "SupportViolation",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::GridMismatch(_) => "GridMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::MaxIterationsExceeded { .. } => "MaxIterationsExceeded",
            Error::InadmissibleTestFunction(_) => "InadmissibleTestFunction",
            Error::IntervalOutOfRange { .. } => "IntervalOutOfRange",
            Error::RingViolation { .. } => "RingViolation",
            Error::DataNotOrdered(_) => "DataNotOrdered",
            Error::InvalidOrder(_) => "InvalidOrder",
            Error::DimensionTooLarge(_) => "DimensionTooLarge",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Io { .. } => "IoError",
        }
    }
}
