use std::io;

use thiserror::Error;

/// Process exit codes.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    /// A bound, overlap or speed-limit check failed.
    pub const CHECK_FAILED: i32 = 1;
    /// Bad command line or config file.
    pub const USAGE: i32 = 2;
    /// Noise violates `B^2 = gamma^2 I`, or operators/states disagree in dimension.
    pub const VALIDATION: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Model(#[from] noisebound_core::Error),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use noisebound_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => exit_code::USAGE,
            CliError::Model(E::NoiseViolation { .. } | E::DimensionMismatch { .. } | E::NotHermitian { .. }) => {
                exit_code::VALIDATION
            }
            CliError::Model(_) => exit_code::USAGE,
            CliError::Io(_) | CliError::Csv(_) => exit_code::IO,
        }
    }
}
