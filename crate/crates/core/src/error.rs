//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unsupported degenerate case: {0}")]
    UnsupportedDegenerate(String),

    #[error("D fields are singular on the axis x2 = 0")]
    SingularAxis,

    #[error("spine crosses the axis (T = 0); use the on-axis limit")]
    AxisCrossing,

    #[error("concavity breakdown at u = {u}: denominator {denominator}")]
    ConcavityBreakdown { u: f64, denominator: f64 },

    #[error("point ({x1}, {x2}) is outside the region: {reason}")]
    OutOfRegion { x1: f64, x2: f64, reason: String },

    #[error("saddle not found for node u0 = {node}: {reason}")]
    SaddleNotFound { node: f64, reason: String },

    #[error("integration started at a stationary point")]
    StationaryStart,

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("shooting failed ({termination}): {detail}")]
    ShootFailure { termination: String, detail: String },

    #[error("slope undefined: horizontal velocity vanishes")]
    SingularSlope,

    #[error("fissure build failed, invariant `{invariant}`: {detail}")]
    FissureBuildFailure { invariant: String, detail: String },

    #[error("flank failure: {0}")]
    FlankFailure(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("oracle did not converge after {sweeps} sweeps, residual {residual:e}")]
    ConvergenceFailure { sweeps: usize, residual: f64 },

    #[error("split simulation stalled: {0}")]
    SimulationStall(String),
}

impl Error {
    /// Stable kebab-case name used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Unsupported(_) => "unsupported",
            Error::UnsupportedDegenerate(_) => "unsupported-degenerate",
            Error::SingularAxis => "singular-axis",
            Error::AxisCrossing => "axis-crossing",
            Error::ConcavityBreakdown { .. } => "concavity-breakdown",
            Error::OutOfRegion { .. } => "out-of-region",
            Error::SaddleNotFound { .. } => "saddle-not-found",
            Error::StationaryStart => "stationary-start",
            Error::IntegrationFailure(_) => "integration-failure",
            Error::ShootFailure { .. } => "shoot-failure",
            Error::SingularSlope => "singular-slope",
            Error::FissureBuildFailure { .. } => "fissure-build-failure",
            Error::FlankFailure(_) => "flank-failure",
            Error::UnsupportedConfiguration(_) => "unsupported-configuration",
            Error::ConvergenceFailure { .. } => "convergence-failure",
            Error::SimulationStall(_) => "simulation-stall",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
