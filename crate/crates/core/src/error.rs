use std::fmt;

use thiserror::Error;

/// Which side of the market a row or list belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Agent,
    Firm,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Agent => f.write_str("agent"),
            Side::Firm => f.write_str("firm"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("{side} row {row} has two peers with the same mean {value}")]
    DuplicateMeans { side: Side, row: usize, value: f64 },

    #[error("malformed preference list: {0}")]
    MalformedPrefList(String),

    #[error("stable-set enumeration supports n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    Parameter { name: &'static str, detail: String },

    #[error("observation {value} for {side} {row}, peer {col} lies outside [0, 1]")]
    Observation { side: Side, row: usize, col: usize, value: f64 },

    #[error("protocol violation in round {round}: {detail}")]
    Protocol { round: u64, detail: String },

    #[error("config field `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("cannot parse config {path}: {detail}")]
    ConfigSyntax { path: String, detail: String },

    #[error("unknown example `{name}` (known: {known})")]
    UnknownExample { name: String, known: String },

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter { name, detail: detail.into() }
    }

    pub(crate) fn protocol(round: u64, detail: impl Into<String>) -> Self {
        Error::Protocol { round, detail: detail.into() }
    }

    pub(crate) fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config { field: field.into(), detail: detail.into() }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
