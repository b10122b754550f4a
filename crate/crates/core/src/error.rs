use crate::models::Regime;
use crate::noise::NoiseKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hilbert space dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("operator is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("expectation value has imaginary part {imag:e} above tolerance")]
    NonRealExpectation { imag: f64 },

    #[error("state vector has zero or non-finite norm")]
    DegenerateState,

    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("step size {dt} exceeds the resolution limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("noise value {0} lies outside [-1, 1]")]
    NoiseOutOfRange(f64),

    #[error("operation not defined for noise kind {0:?}")]
    UnsupportedNoiseKind(NoiseKind),

    #[error("polynomial degree {0} exceeds the supported maximum")]
    DegreeTooHigh(usize),

    #[error("regime mismatch: expected {expected:?}, found {found:?}")]
    RegimeMismatch { expected: Regime, found: Regime },

    #[error("expected {expected} noise values, got {found}")]
    ChannelCountMismatch { expected: usize, found: usize },

    #[error("channel {channel}: fluctuation-dissipation relation violated (A = {a}, D = {d})")]
    FluctuationDissipation { channel: usize, a: f64, d: f64 },

    #[error("model failed validation: {0}")]
    InvalidModel(&'static str),

    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sample times must be sorted and lie in [0, t_end]")]
    InvalidSampleTimes,

    #[error("{what} tolerance breached at t = {time}: {value:e}")]
    ToleranceBreach {
        what: &'static str,
        value: f64,
        time: f64,
    },

    #[error("non-finite value produced during integration at t = {0}")]
    NonFinite(f64),
}
