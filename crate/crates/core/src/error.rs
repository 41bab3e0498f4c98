use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} in {field}")]
    NonFiniteValue { field: &'static str, value: f64 },

    #[error("masses sum to {sum}, expected 1 within {tolerance}")]
    MassSumOutOfTolerance { sum: f64, tolerance: f64 },

    #[error("{field} = {value} is outside [0, 1]")]
    RiskOutOfRange { field: &'static str, value: f64 },

    #[error("negative mass {0}")]
    NegativeMass(f64),

    #[error("parameter {name} = {value} out of range: {reason}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("outcome prevalence {0} is degenerate (must lie strictly between 0 and 1)")]
    DegenerateOutcome(f64),

    #[error("population means differ: {0} vs {1}")]
    MeanMismatch(f64, f64),

    #[error("no assigned risk for group {0}")]
    MissingAssignment(String),

    #[error("group keys differ between tables: {0}")]
    GroupKeyMismatch(String),

    #[error("negative rate {name} = {value}")]
    NegativeRate { name: &'static str, value: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("only {distinct} distinct risks for {bins} bins")]
    DegenerateBins { distinct: usize, bins: usize },

    #[error("cell ({decile1}, {decile2}) has no person-years")]
    ZeroPersonYears { decile1: u32, decile2: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn check_finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteValue { field, value })
    }
}

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<f64> {
    check_finite(field, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::RiskOutOfRange { field, value })
    }
}
