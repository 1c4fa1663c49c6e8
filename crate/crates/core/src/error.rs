use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {n} must be even and at least 8")]
    InvalidGrid { n: usize },

    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sample {index} is not finite")]
    NonFinite { index: usize },

    #[error("input mean {mean:e} exceeds the mean-zero tolerance; project first")]
    NotMeanZero { mean: f64 },

    #[error("input is not nondecreasing at node {index}")]
    NotMonotone { index: usize },

    /// A datum violates one of its invariants. `invariant` names it.
    #[error("invalid datum ({invariant}): {detail}")]
    InvalidDatum {
        invariant: &'static str,
        detail: String,
    },

    #[error("characteristic blew up at t = {t}: z0 = {re} + {im}i")]
    BlowUp { t: f64, re: f64, im: f64 },

    #[error("t = {t} lies within the exclusion band of defect time {defect}")]
    DefectTime { t: f64, defect: f64 },

    #[error("t_end = {t_end} is not before the breakdown time {t_star}")]
    PastBreakdown { t_end: f64, t_star: f64 },

    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    /// A numerical guard tripped during time stepping.
    #[error("numerical guard at t = {t}: {detail}")]
    Guard { t: f64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::NotMeanZero { .. } => "not_mean_zero",
            Error::NotMonotone { .. } => "not_monotone",
            Error::InvalidDatum { .. } => "invalid_datum",
            Error::BlowUp { .. } => "blow_up",
            Error::DefectTime { .. } => "defect_time",
            Error::PastBreakdown { .. } => "past_breakdown",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Guard { .. } => "guard",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            detail: detail.into(),
        }
    }

    pub(crate) fn datum(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidDatum {
            invariant,
            detail: detail.into(),
        }
    }
}
