use thiserror::Error;

/// Errors shared by every module of the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient quotients: needed {needed}, sequence provides {available}")]
    InsufficientQuotients { needed: usize, available: usize },
    #[error("quotient a_{index} is too large to materialize exactly")]
    Unmaterializable { index: usize },
    #[error("precision exhausted: use at least {advisory_bits} bits")]
    PrecisionExhausted { advisory_bits: u32 },
    #[error("epsilon dual evaluation disagrees: relative gap 2^{log2_gap:.1}")]
    DualEvaluationMismatch { log2_gap: f64 },
    #[error("small divisor breakdown at index {index}")]
    SmallDivisorBreakdown { index: usize },
    #[error("continuation failed, last good |delta| = {last_good:e}")]
    ContinuationFailed { last_good: f64 },
    #[error("cycle collapsed onto a fixed point")]
    DegenerateCycle,
    #[error("point outside the univalent domain: |z| = {modulus:e}")]
    OutsideUnivalentDomain { modulus: f64 },
    #[error("z^q is too close to epsilon; residual undefined")]
    NearCycleDegeneracy,
    #[error("point outside domain of {what}")]
    OutsideDomain { what: &'static str },
    #[error("lift ambiguity: solution at distance {distance:e} from the seed")]
    LiftAmbiguity { distance: f64 },
    #[error("Fatou coordinate unreachable from this point")]
    CoordinateUnreachable,
    #[error("no preimage in the renormalization strip")]
    OutsideCylinder,
    #[error("derivative estimate unstable: spread {spread:e}")]
    UnstableDerivative { spread: f64 },
    #[error("inclusion violation: {0}")]
    InclusionViolation(String),
    #[error("region has infinite area")]
    UnsupportedRegion,
    #[error("density undefined on an empty window")]
    UndefinedDensity,
    #[error("orbit budget {given} below required {required}")]
    BudgetTooSmall { given: u64, required: u64 },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InsufficientQuotients { .. }
                | Error::InvalidLadder(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::UnsupportedRegion
                | Error::BudgetTooSmall { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
