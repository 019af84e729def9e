//! Crate-wide error type and result alias.

use std::fmt;

/// A single configuration problem, located by a dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum Error {
    /// A vector or matrix does not match the expected dimension.
    Dimension { expected: usize, got: usize },
    /// A parameter violates its documented invariants (q < 2, non-SPD matrix, ...).
    InvalidSpec(String),
    /// The requested operation is not defined for these parameters.
    Unsupported(String),
    /// Two meshes or grids that must agree do not.
    GridMismatch(String),
    /// Every problem found while validating a configuration file.
    Config(Vec<ConfigIssue>),
    /// The solver failed to produce a usable result.
    Solver(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidSpec(msg) => write!(f, "invalid specification: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported operation: {msg}"),
            Error::GridMismatch(msg) => write!(f, "grid mismatch: {msg}"),
            Error::Config(issues) => {
                writeln!(f, "{} configuration error(s):", issues.len())?;
                for issue in issues {
                    writeln!(f, "  {issue}")?;
                }
                Ok(())
            }
            Error::Solver(msg) => write!(f, "solver failure: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
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
