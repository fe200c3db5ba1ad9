//! Crate-wide error type and result alias.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum FracError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("accuracy error: requested tolerance {requested:.3e} not reached, achieved estimate {achieved:.3e} (value {value:.6e})")]
    Accuracy {
        requested: f64,
        achieved: f64,
        value: f64,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("solve error: {message} (residual history: {history:?})")]
    Solve { message: String, history: Vec<f64> },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("config validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FracError>;

impl FracError {
    /// Process exit code for the CLI: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            FracError::Parameter(_)
            | FracError::Input(_)
            | FracError::Validation(_)
            | FracError::ConfigSyntax { .. } => 2,
            FracError::Accuracy { .. }
            | FracError::Numerical(_)
            | FracError::Solve { .. }
            | FracError::Construction(_) => 3,
            FracError::Io(_) => 4,
        }
    }
}
