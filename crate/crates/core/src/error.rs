use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed conic program: {0}")]
    Program(String),

    #[error("exhaustive enumeration needs {needed} fixings, cap is {cap}; use branch-and-bound mode")]
    EnumerationCap { needed: u128, cap: u128 },

    #[error("binary variable {name} = {value} is not integral")]
    Integrality { name: String, value: f64 },

    #[error("unsupported WSR weight {0}: only 1 and 2^-j are representable with second-order cones")]
    UnsupportedWeight(f64),

    #[error("UE {0} has an all-zero channel to its serving station")]
    ZeroChannel(usize),

    #[error("result sets are not paired: {0}")]
    Unpaired(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Command-line parse failure, including `--help` and `--version`.
    #[error("{0}")]
    Usage(#[from] clap::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
