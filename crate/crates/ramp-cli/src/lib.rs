//! IO companion to `ramp-core`: the binary instance container, the CSV
//! output formats, the key-value config file, and the command
//! implementations behind the `ramp` binary.

pub mod commands;
pub mod config;
pub mod instance_io;
pub mod output;

/// Error category with its process exit code.
///
/// The contract is stable: 0 success, 2 bad arguments, 3 numerical
/// failure, 4 I/O failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ramp_core::replica::ReplicaError> for CliError {
    fn from(e: ramp_core::replica::ReplicaError) -> Self {
        use ramp_core::replica::ReplicaError::*;
        match e {
            InvalidParams(_) | MseOutOfRange { .. } | InvalidGrid(_) => {
                CliError::Usage(e.to_string())
            }
            Quadrature { .. } | DegeneratePlateau => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ramp_core::state_evolution::StateEvolutionError> for CliError {
    fn from(e: ramp_core::state_evolution::StateEvolutionError) -> Self {
        use ramp_core::state_evolution::StateEvolutionError::*;
        match e {
            Params(p) => p.into(),
            InvalidConfig(m) => CliError::Usage(m.to_string()),
            Quadrature { .. } | NonFiniteResult { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ramp_core::phase::PhaseError> for CliError {
    fn from(e: ramp_core::phase::PhaseError) -> Self {
        use ramp_core::phase::PhaseError::*;
        match e {
            InvalidSweep(m) => CliError::Usage(m.to_string()),
            BracketSameClass { .. } => CliError::Usage(e.to_string()),
            Replica { .. } | StateEvolution { .. } | AmbiguousBracket { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<ramp_core::amp::AmpError> for CliError {
    fn from(e: ramp_core::amp::AmpError) -> Self {
        use ramp_core::amp::AmpError::*;
        match e {
            InvalidConfig(_) | DimensionMismatch | LengthMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            Diverged { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ramp_core::instance::InstanceError> for CliError {
    fn from(e: ramp_core::instance::InstanceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ramp_core::prior::PriorError> for CliError {
    fn from(e: ramp_core::prior::PriorError) -> Self {
        CliError::Usage(e.to_string())
    }
}
