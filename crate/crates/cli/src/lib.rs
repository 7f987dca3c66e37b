//! Command-line front end for `invnet-core`: TOML configuration, the
//! `solve`, `verify` and `simulate` commands, and JSON/CSV reports.

pub mod commands;
pub mod config;
pub mod method;
pub mod report;

pub use commands::{run_simulate, run_solve, run_verify, SimulateArgs, VerifyArgs};
pub use config::{load_config, parse_config, ConfigFile};
pub use method::Method;
pub use report::{read_theta_json, theta_json, Check, CheckKind, Report};

use invnet_core::Error;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 for bad input or a method that does not fit the configuration,
    /// 3 for solver breakdowns.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Precondition(_)
            | Error::NotErgodic(_) => CliError::Validation(e.to_string()),
            Error::Reducible(_)
            | Error::Solver(_)
            | Error::Sequencing(_)
            | Error::DegenerateElimination { .. } => CliError::Numerical(e.to_string()),
        }
    }
}
