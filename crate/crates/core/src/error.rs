use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("field length {got} does not match mesh ({expected})")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-positive density {value:e} in cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },
    #[error("wrong velocity kind for {0}")]
    VelocityKind(&'static str),
    #[error("newton did not converge in {iterations} iterations (residual {residual:e})")]
    NonlinearDivergence { iterations: usize, residual: f64 },
    #[error("no damped newton iterate kept the density positive")]
    PositivityLoss,
    #[error("linear solver failed: {0}")]
    LinearSolver(String),
    #[error("step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },
    #[error("time {tau} outside the run horizon [0, {end}]")]
    OutsideHorizon { tau: f64, end: f64 },
    #[error("ladder needs at least {needed} levels, got {got}")]
    LadderTooShort { needed: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Errors that mean the nonlinear step failed, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NonlinearDivergence { .. } | Error::PositivityLoss | Error::LinearSolver(_) => true,
            Error::StepFailed { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
