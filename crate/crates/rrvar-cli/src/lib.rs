//! Support library for the `rrvar` binary: dataset CSV I/O, versioned model
//! JSON files, and diagnostic correlation functions.

pub mod dataset;
pub mod diagnostics;
pub mod modelfile;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_NONCONVERGENCE: u8 = 4;

/// A command failure carrying the process exit code.
#[derive(Debug)]
pub struct CmdError {
    pub code: u8,
    pub message: String,
}

impl CmdError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(e: csv::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<rrvar::Error> for CmdError {
    fn from(e: rrvar::Error) -> Self {
        use rrvar::Error::*;
        let code = match e {
            InvalidInput(_) | InsufficientData { .. } | InvalidRank { .. } | InvalidOrder(_)
            | InvalidCase(_) => EXIT_USAGE,
            NotPositiveDefinite | NumericalFailure(_) | SingularEstimate
            | RankDeficientDesign | NonCausalModel => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
