use heatlmi_core::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const SIMULATION: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Inconclusive(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Inconclusive(_) => exit::INCONCLUSIVE,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Simulation(_) => exit::SIMULATION,
            CliError::Io(_) | CliError::Other(_) => exit::IO,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_)
            | CoreError::Configuration(_)
            | CoreError::Assumption { .. }
            | CoreError::Dimension(_) => CliError::Config(e.to_string()),
            CoreError::Inconclusive { .. } => CliError::Inconclusive(e.to_string()),
            CoreError::Synthesis { status, .. } => match status {
                heatlmi_core::SolveStatus::Inconclusive => CliError::Inconclusive(e.to_string()),
                _ => CliError::Infeasible(e.to_string()),
            },
            CoreError::Analysis(_) => CliError::Simulation(e.to_string()),
            CoreError::Serde(_) => CliError::Other(e.to_string()),
        }
    }
}
