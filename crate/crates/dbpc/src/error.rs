//! Error type shared by every module in the crate.

use std::fmt;

/// Errors produced by tensor ops, the network, data loading and the CLI.
#[derive(Debug)]
pub enum Error {
    /// Dimension or shape mismatch between operands.
    Shape(String),
    /// Kernel violates a structural requirement (e.g. even size).
    InvalidKernel(String),
    /// Layer or interface index out of range.
    Index(String),
    /// Dataset-level problem (label out of range, empty set, ...).
    Data(String),
    /// Malformed binary input; the message names the offending offset.
    Format(String),
    /// Invalid configuration; the message names the field.
    Config(String),
    /// Checkpoint cannot be read or does not match the expected network.
    Checkpoint(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidKernel(msg) => write!(f, "invalid kernel: {msg}"),
            Error::Index(msg) => write!(f, "index out of range: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
