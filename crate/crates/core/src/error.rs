use std::fmt;

use thiserror::Error;

/// Errors raised across the model, solvers, simulator and experiment harness.
///
/// Variants mirror the stable error codes printed by the command line tool, see
/// [`Error::code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class}: k = {k} exceeds d = {d}")]
    KExceedsD { class: usize, k: usize, d: usize },
    #[error("class {class}: negative arrival rate {sigma}")]
    NegativeRate { class: usize, sigma: f64 },
    #[error("total arrival rate is zero")]
    ZeroTotalRate,
    #[error("frame is empty: left {left} is not below right {right}")]
    EmptyFrame { left: f64, right: f64 },
    #[error("parameter out of range: {0}")]
    ParamRange(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("distribution family has no CDF access: {0}")]
    UnknownFamily(String),
    #[error("empty input")]
    EmptyInput,
    #[error("field is improper (x_inf = {x_pos_inf}, x_-inf = {x_neg_inf})")]
    ImproperField { x_pos_inf: f64, x_neg_inf: f64 },
    #[error("tail integral diverges")]
    Divergent,
    #[error("negative component size {0}")]
    NegativeSize(f64),
    #[error("n = {n} is smaller than the largest selection set {dbar}")]
    NTooSmall { n: usize, dbar: usize },
    #[error("velocity estimation requires a free frame with zero speed")]
    FrameNotFree,
    #[error("Monte Carlo standard error {achieved:.3e} exceeds requested {requested:.3e}")]
    McVarianceExceeded { achieved: f64, requested: f64 },
    #[error("mass {mass:.3e} reached the grid edge at w = {w}")]
    GridExhausted { w: f64, mass: f64 },
    #[error("no proper fixed point: {0}")]
    NoProperFp(String),
    #[error("relaxation is not monotone: {0}")]
    MonotonicityViolated(String),
    #[error("iteration limit of {0} reached")]
    MaxIters(usize),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("classification ambiguous: {0}")]
    ClassificationAmbiguous(String),
    #[error("speed {v} lies inside or on the wrong side of the wave speed range ({bound})")]
    SpeedInWaveRange { v: f64, bound: String },
    #[error("occupation measure did not stabilise: {0}")]
    NonConverged(String),
    #[error("flux identity only applies to proper free fixed points, got {0}")]
    NotFreeFp(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for the error.
    pub fn code(&self) -> ErrorCode {
        use ErrorCode as C;
        match self {
            Error::KExceedsD { .. } => C::KExceedsD,
            Error::NegativeRate { .. } => C::NegativeRate,
            Error::ZeroTotalRate => C::ZeroTotalRate,
            Error::EmptyFrame { .. } => C::EmptyFrame,
            Error::ParamRange(_) => C::ParamRange,
            Error::InvalidConfig(_) => C::InvalidConfig,
            Error::UnknownFamily(_) => C::UnknownFamily,
            Error::EmptyInput => C::EmptyInput,
            Error::ImproperField { .. } => C::ImproperField,
            Error::Divergent => C::Divergent,
            Error::NegativeSize(_) => C::NegativeSize,
            Error::NTooSmall { .. } => C::NTooSmall,
            Error::FrameNotFree => C::FrameNotFree,
            Error::McVarianceExceeded { .. } => C::McVarianceExceeded,
            Error::GridExhausted { .. } => C::GridExhausted,
            Error::NoProperFp(_) => C::NoProperFp,
            Error::MonotonicityViolated(_) => C::MonotonicityViolated,
            Error::MaxIters(_) => C::MaxIters,
            Error::NoRoot(_) => C::NoRoot,
            Error::ClassificationAmbiguous(_) => C::ClassificationAmbiguous,
            Error::SpeedInWaveRange { .. } => C::SpeedInWaveRange,
            Error::NonConverged(_) => C::NonConverged,
            Error::NotFreeFp(_) => C::NotFreeFp,
            Error::Parse(_) | Error::Json(_) => C::Parse,
            Error::Io(_) => C::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    KExceedsD,
    NegativeRate,
    ZeroTotalRate,
    EmptyFrame,
    ParamRange,
    InvalidConfig,
    UnknownFamily,
    EmptyInput,
    ImproperField,
    Divergent,
    NegativeSize,
    NTooSmall,
    FrameNotFree,
    McVarianceExceeded,
    GridExhausted,
    NoProperFp,
    MonotonicityViolated,
    MaxIters,
    NoRoot,
    ClassificationAmbiguous,
    SpeedInWaveRange,
    NonConverged,
    NotFreeFp,
    Parse,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        use ErrorCode::*;
        match self {
            KExceedsD => "K_EXCEEDS_D",
            NegativeRate => "NEGATIVE_RATE",
            ZeroTotalRate => "ZERO_TOTAL_RATE",
            EmptyFrame => "EMPTY_FRAME",
            ParamRange => "PARAM_RANGE",
            InvalidConfig => "INVALID_CONFIG",
            UnknownFamily => "UNKNOWN_FAMILY",
            EmptyInput => "EMPTY_INPUT",
            ImproperField => "IMPROPER_FIELD",
            Divergent => "DIVERGENT",
            NegativeSize => "NEGATIVE_SIZE",
            NTooSmall => "N_TOO_SMALL",
            FrameNotFree => "FRAME_NOT_FREE",
            McVarianceExceeded => "MC_VARIANCE_EXCEEDED",
            GridExhausted => "GRID_EXHAUSTED",
            NoProperFp => "NO_PROPER_FP",
            MonotonicityViolated => "MONOTONICITY_VIOLATED",
            MaxIters => "MAX_ITERS",
            NoRoot => "NO_ROOT",
            ClassificationAmbiguous => "CLASSIFICATION_AMBIGUOUS",
            SpeedInWaveRange => "SPEED_IN_WAVE_RANGE",
            NonConverged => "NONCONVERGED",
            NotFreeFp => "NOT_FREE_FP",
            Parse => "PARSE",
            Io => "IO",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
