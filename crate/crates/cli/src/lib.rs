//! Configuration-driven experiment drivers behind the `podctl` binary.
//!
//! Each `cmd_*` function reads a [`RunConfig`], writes CSV and JSON files into
//! its output directory and returns the list of written files with a JSON
//! summary. Checks that the numerical results must satisfy are reported as
//! [`CliError::Rigor`] after all files are written.

pub mod commands;
pub mod config;

pub use commands::{cmd_control, cmd_mpc, cmd_pareto, cmd_pod, cmd_rom, cmd_simulate, run, Command, Outcome};
pub use config::{
    ControlChoice, ControlConfig, MpcConfig, ParetoConfig, PodConfig, Preset, RunConfig, SimulateConfig, StepName,
    StrategyName, Weight,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Rigor(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Rigor(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) | CliError::Numerical(_) => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical_from!(fem_core::Error, pod_core::Error, evolve::Error, rom::Error, optctl::Error);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
