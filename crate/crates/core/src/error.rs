//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("mode `{label}` is {actual}, expected a {expected} mode")]
    WrongModeKind {
        label: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operands act on different Hilbert spaces")]
    SpaceMismatch,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),

    #[error("trace drifted by {drift:.3e} at t = {t} us; step size too coarse for this system")]
    TraceDrift { t: f64, drift: f64 },

    #[error("non-finite values in the state at t = {0} us")]
    NonFinite(f64),

    #[error("steady state requires a time-independent system")]
    TimeDependentSteadyState,

    #[error("Liouvillian null space is {0}-dimensional; the system has decoupled sectors")]
    DegenerateSteadyState(usize),

    #[error("steady-state residual {0:.3e} exceeds tolerance")]
    SteadyStateResidual(f64),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "dispersive relation breaks down: the cavity sits between the qubit transitions \
         (detuning and detuning-plus-anharmonicity have opposite signs)"
    )]
    StraddledResonance,
}
