use std::fmt;

/// Unified error type for all fallible operations in the crate.
///
/// Library functions return `Result<T, Error>` instead of panicking; the CLI
/// maps variants to exit codes and the FFI layer to integer status codes.
#[derive(Debug)]
pub enum Error {
    /// Scene document is malformed; the string names the offending path.
    Parse(String),
    /// Scene parsed but violates an invariant.
    Validation(String),
    /// Geometry input is unusable (open mesh, degenerate element, ...).
    Geometry(String),
    /// Iterative solver failed; carries the residual that was reached.
    Solver { message: String, residual: f64 },
    /// Invalid argument to a numerical routine.
    InvalidArgument(String),
    /// Filesystem or encoding problem.
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse(msg) => write!(f, "parse error: {msg}"),
            Self::Validation(msg) => write!(f, "invalid scene: {msg}"),
            Self::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Self::Solver { message, residual } => {
                write!(f, "solver error: {message} (residual {residual:.3e})")
            }
            Self::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Self::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse(e.to_string())
    }
}
