use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}`: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },

    #[error("location index {index} out of range for {locations} locations")]
    IndexOutOfRange { index: usize, locations: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("reduced generator is not irreducible: {0}")]
    Reducible(String),

    #[error("numerical solver failure: {0}")]
    Solver(String),

    /// A recursive elimination step referenced an entry that has not been derived yet.
    #[error("elimination order violated: {0}")]
    Sequencing(String),

    #[error(
        "degenerate elimination at GBE of state ({k1}, {k2}): kappa coefficient {coefficient:e}"
    )]
    DegenerateElimination {
        k1: usize,
        k2: usize,
        coefficient: f64,
    },

    #[error("process is not ergodic: {0}")]
    NotErgodic(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            message: message.into(),
        }
    }
}
