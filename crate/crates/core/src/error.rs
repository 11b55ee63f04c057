use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 2 points, got {0}")]
    GridTooShort(usize),
    #[error("grid is not strictly increasing at index {index}")]
    GridNotIncreasing { index: usize },
    #[error("grid contains a non-finite abscissa at index {index}")]
    GridNonFinite { index: usize },
    #[error("curves live on different grids")]
    GridMismatch,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("a functional sample needs at least one curve")]
    EmptySample,

    #[error("derivative order {order} is not supported (expected 1 or 2)")]
    UnsupportedOrder { order: usize },
    #[error("derivative order {order} exceeds local polynomial degree {degree}")]
    OrderExceedsDegree { order: usize, degree: usize },
    #[error("grid of length {len} is too short for this derivative stencil (need {needed})")]
    GridTooShortForStencil { len: usize, needed: usize },
    #[error("smoothing bandwidth {bandwidth} leaves fewer than {needed} points around t = {at}")]
    SmoothingBandwidthTooSmall { bandwidth: f64, needed: usize, at: f64 },
    #[error("distance kind requires a derivative method")]
    MissingDerivativeMethod,

    #[error("unknown kernel pair `{0}`")]
    UnknownKernel(String),
    #[error("shadow profile violates the limit condition at 0: {0}")]
    ShadowLimit(String),
    #[error("derived profile is increasing near t = {t}")]
    ProfileIncreasing { t: f64 },

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error(
        "density normalizer is zero: no pair of curves lies within the bandwidth \
         (minimum pairwise distance {min_pairwise})"
    )]
    NormalizerZero { min_pairwise: f64 },
    #[error("query point lies outside every support ball")]
    OutsideSupport,
    #[error("evaluation at a sample curve needs lim k'(t)/t, which this profile does not provide")]
    SingularEvaluation,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature curve is degenerate (zero norm)")]
    DegenerateFeature,

    #[error("{path}: line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: String,
        line: usize,
        column: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input errors map to exit code 2 in the CLI, numerical failures to 3.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::GridTooShort(_)
                | Error::GridNotIncreasing { .. }
                | Error::GridNonFinite { .. }
                | Error::GridMismatch
                | Error::LengthMismatch { .. }
                | Error::NonFinite { .. }
                | Error::EmptySample
                | Error::UnknownKernel(_)
                | Error::InvalidConfig(_)
                | Error::MissingDerivativeMethod
                | Error::UnsupportedOrder { .. }
                | Error::OrderExceedsDegree { .. }
                | Error::GridTooShortForStencil { .. }
                | Error::SmoothingBandwidthTooSmall { .. }
                | Error::InvalidBandwidth(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }

    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::InvalidConfig(_)
            | Error::UnknownKernel(_)
            | Error::InvalidBandwidth(_)
            | Error::SmoothingBandwidthTooSmall { .. } => "config",
            Error::NormalizerZero { .. }
            | Error::OutsideSupport
            | Error::SingularEvaluation
            | Error::DegenerateFeature
            | Error::ShadowLimit(_)
            | Error::ProfileIncreasing { .. } => "numerical",
            _ => "input",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
