pub mod experiment;
pub mod selftest;

use thiserror::Error;

/// Failures of the command-line tool, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid experiment setup: {0}")]
    Unresolved(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] softqec::Error),
    #[error("{0} self-test check(s) failed")]
    SelftestFailed(usize),
}

impl CliError {
    /// 1 simulation, 2 command line (reserved for clap), 3 parse,
    /// 4 unresolved names or invalid values, 5 I/O, 6 self-test failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Simulation(_) => 1,
            CliError::Parse { .. } => 3,
            CliError::Unresolved(_) => 4,
            CliError::Io(_) => 5,
            CliError::SelftestFailed(_) => 6,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
