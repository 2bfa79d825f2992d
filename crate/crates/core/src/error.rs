use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Picard iteration needs at least one sweep.
    IterationCount(usize),
    /// The Young-inequality parameter must be strictly positive.
    Epsilon(f64),
    /// Fewer than 6 intervals; the boundary rows of the stencil would overlap.
    GridTooSmall(usize),
    GridMismatch { expected: usize, found: usize },
    InvalidParameter(&'static str),
    StateKind { expected: &'static str, found: &'static str },
    /// Zero pivot while factoring or inverting.
    Singular { row: usize },
    MissingObserverState,
    /// Initial datum does not vanish at an endpoint.
    Compatibility { endpoint: f64, value: f64 },
    RunTooLong { steps: f64 },
    TooFewSamples { usable: usize },
    BlowUp { step: usize, time: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IterationCount(n) => write!(f, "iteration count must be at least 1, got {n}"),
            Error::Epsilon(e) => write!(f, "epsilon must be positive, got {e}"),
            Error::GridTooSmall(j) => write!(f, "J must be at least 6, got {j}"),
            Error::GridMismatch { expected, found } => {
                write!(f, "grid function has {found} nodes, expected {expected}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::StateKind { expected, found } => {
                write!(f, "expected a state of kind {expected}, got {found}")
            }
            Error::Singular { row } => write!(f, "zero pivot in row {row}"),
            Error::MissingObserverState => {
                write!(f, "single-controller stepping needs the previous observer state")
            }
            Error::Compatibility { endpoint, value } => write!(
                f,
                "initial datum violates u0({endpoint}) = 0 (value {value:e})"
            ),
            Error::RunTooLong { steps } => {
                write!(f, "run would take {steps:e} steps, more than the 1e7 limit")
            }
            Error::TooFewSamples { usable } => {
                write!(f, "need at least 10 usable samples for a rate fit, got {usable}")
            }
            Error::BlowUp { step, time } => {
                write!(f, "solution blew up at step {step} (t = {time})")
            }
        }
    }
}

impl core::error::Error for Error {}
