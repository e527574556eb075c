use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("schedule violation: {0}")]
    Schedule(String),
    #[error("sequence construction failed: {0}")]
    Construction(String),
    #[error("toggling profile error: {0}")]
    Profile(String),
    #[error("pulse calibration failed: {message} (best residual {residual:.3e})")]
    Calibration { message: String, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("circuit compile error: {0}")]
    Compile(String),
    #[error("degenerate measurement branch: probability {0:.3e}")]
    DegenerateBranch(f64),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("T2 fit failed: {0}")]
    Fit(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
