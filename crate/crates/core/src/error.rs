//! Error type shared by the library and the command-line front-end.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range configuration, anchored at a line when known.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    /// Ball membership or series certificate violated at an RG step.
    #[error("certificate violation at step {step}: {message}")]
    Certificate { step: usize, message: String },
    /// Eigensolver, Newton or linear-solve failure.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    pub fn certificate(step: usize, message: impl Into<String>) -> Self {
        Error::Certificate {
            step,
            message: message.into(),
        }
    }

    /// Process exit code: 1 config, 2 certificate, 3 numerical (and i/o).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::Certificate { .. } => 2,
            Error::Numerical(_) | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
