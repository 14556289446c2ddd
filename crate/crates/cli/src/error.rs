use std::fmt;

use hellinger_core::estimation::EstimationError;
use hellinger_core::newton::NewtonError;

/// Process exit codes.
pub mod code {
    pub const OK: i32 = 0;
    /// Output could not be written.
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const DOMAIN: i32 = 4;
    pub const NO_CONVERGENCE: i32 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: code::USAGE, message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: code::IO, message: msg.into() }
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        CliError { code: code::INFEASIBLE, message: msg.into() }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CliError { code: code::DOMAIN, message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn newton_code(e: &NewtonError) -> i32 {
    match e {
        NewtonError::Infeasible(_) => code::INFEASIBLE,
        NewtonError::MaxIterations { .. }
        | NewtonError::StepTooSmall { .. }
        | NewtonError::DegenerateHessian { .. } => code::NO_CONVERGENCE,
        NewtonError::DimensionMismatch(_) => code::USAGE,
        NewtonError::Linalg(_)
        | NewtonError::Factor(_)
        | NewtonError::Gamma(_)
        | NewtonError::NotCoercive(_)
        | NewtonError::NotPd(_) => code::DOMAIN,
    }
}

pub fn estimation_code(e: &EstimationError) -> i32 {
    match e.root() {
        EstimationError::Newton(n) => newton_code(n),
        EstimationError::ProjectionNotPd { .. } => code::INFEASIBLE,
        EstimationError::DuplicatePole(_)
        | EstimationError::PoleOutsideDisk(_)
        | EstimationError::UnpairedPole(_)
        | EstimationError::TooFewSamples { .. }
        | EstimationError::Invalid(_) => code::USAGE,
        _ => code::DOMAIN,
    }
}

impl From<NewtonError> for CliError {
    fn from(e: NewtonError) -> Self {
        CliError { code: newton_code(&e), message: e.to_string() }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        CliError { code: estimation_code(&e), message: e.to_string() }
    }
}
