use std::process::ExitCode;

use relicomp::expconv::ExpPolyError;
use relicomp::gofit::FitError;
use relicomp::ma::MaError;
use relicomp::simgen::SimError;
use relicomp::sysmodel::SystemError;
use thiserror::Error;

/// Failures split by who has to act: the caller (bad input) or the
/// numerics (a computation that did not produce a finite answer).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }

    /// Same class, message led by `context`.
    pub fn prefixed(self, context: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{context}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }
}

fn fit_is_numerical(e: &FitError) -> bool {
    matches!(e, FitError::NoRoot { .. })
}

fn ma_is_numerical(e: &MaError) -> bool {
    matches!(
        e,
        MaError::Algebra(ExpPolyError::QuadratureFailed { .. })
    )
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        if fit_is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        let numerical = match &e {
            SystemError::Fit { source, .. } => fit_is_numerical(source),
            SystemError::Ma(m) => ma_is_numerical(m),
            _ => false,
        };
        if numerical {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Validation(e.to_string())
    }
}
