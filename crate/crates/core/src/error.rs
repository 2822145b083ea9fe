use thiserror::Error;

/// Everything that can go wrong in this crate.
///
/// Variants map one-to-one onto the failure modes of the public
/// operations; the CLI turns a subset of them into stable exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("exponent range violated: {0}")]
    RangeViolation(String),

    #[error("degenerate state (xi = {xi}, f = {f}): use the series or phase variables here")]
    DegenerateState { xi: f64, f: f64 },

    #[error("origin series out of range at xi = {xi} (bracket = {bracket})")]
    SeriesOutOfRange { xi: f64, bracket: f64 },

    #[error("step size underflow at {at} (h = {h})")]
    StepFailure { at: f64, h: f64 },

    #[error("insufficient tail: {found} samples below threshold, need {needed}")]
    InsufficientTail { found: usize, needed: usize },

    #[error("no bracket for alpha* found in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error(
        "non-monotone witness: alpha = {turns_up} turns up but larger alpha = {crosses_zero} crosses zero"
    )]
    NonMonotoneWitness { turns_up: f64, crosses_zero: f64 },

    #[error("orbit at alpha = {alpha} stayed inconclusive up to xi = {xi_max}")]
    Inconclusive { alpha: f64, xi_max: f64 },

    #[error("wrong regime: alpha = {alpha} classifies as {found}, expected {expected}")]
    WrongRegime {
        alpha: f64,
        found: String,
        expected: String,
    },

    #[error("evaluation at xi = {xi} lies beyond the profile grid (last xi = {last})")]
    ExtrapolationError { xi: f64, last: f64 },

    #[error("barrier too low: u0({r}) = {u0} exceeds U(r, tau0) = {barrier} at tau0 = {tau0}")]
    BarrierTooLow {
        r: f64,
        u0: f64,
        barrier: f64,
        tau0: f64,
    },

    #[error("time step underflow: dt = {dt} < dt_min = {dt_min} at t = {t}")]
    CflFailure { dt: f64, dt_min: f64, t: f64 },

    #[error("support reached the outer boundary R_max = {r_max} at t = {t}")]
    DomainTooSmall { r_max: f64, t: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
