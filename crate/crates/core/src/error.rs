use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
///
/// Variants split into two families that the CLI maps onto distinct exit
/// codes: input validation (bad configuration, malformed files) and runtime
/// failures (an attack precondition that does not hold, I/O trouble).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("waveform file: {0}")]
    WaveformFormat(String),

    #[error(
        "detector is not blinded at {energy_pj:.3} pJ per pulse \
         ({clicks} SD peaks above the discrimination level)"
    )]
    NotBlinded { energy_pj: f64, clicks: usize },

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidField { .. }
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::WaveformFormat(_) => true,
            Error::Scenario { source, .. } => source.is_validation(),
            Error::NotBlinded { .. } | Error::Io { .. } | Error::Csv(_) => false,
        }
    }

    /// Name of the offending field for validation errors, if there is one.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            Error::InvalidField { field, .. } => Some(field),
            Error::Scenario { source, .. } => source.field_name(),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
