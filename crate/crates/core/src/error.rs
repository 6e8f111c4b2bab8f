use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),

    #[error("matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("linear system is singular")]
    Singular,

    #[error("Lyapunov solve limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("pair (A, B) is not controllable")]
    Uncontrollable,

    #[error("invalid pole set: {0}")]
    InvalidPoles(String),

    #[error("eigenvalue solver did not converge")]
    EigenNoConvergence,

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("{what} = {value} is not a multiple of the grid step {dt}")]
    OffGrid {
        what: &'static str,
        value: f64,
        dt: f64,
    },

    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),

    #[error("invalid dwell specification: {0}")]
    InvalidDwell(String),

    #[error("mode index {mode} out of range (p = {p})")]
    InvalidMode { mode: usize, p: usize },

    #[error("signal horizon {horizon} does not cover required time {required}")]
    SignalTooShort { horizon: f64, required: f64 },

    #[error("oracle access to the switching signal is not allowed on a causal signal")]
    CausalSignal,

    #[error("input history has {have} samples, {need} required")]
    HistoryTooShort { have: usize, need: usize },

    #[error("prediction horizon {tau} exceeds the delay {delay}")]
    HorizonTooLong { tau: f64, delay: f64 },

    #[error("empty matrix family")]
    EmptyFamily,

    #[error("Chebyshev center did not converge (radius gap {gap:e})")]
    CenterNoConvergence { gap: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
