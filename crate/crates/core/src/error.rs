use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error {error} after {subdivisions} subdivisions")]
    QuadratureNonConvergence {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("moment of order {order} diverges at beta = 0 (tail index {tail_index})")]
    DivergentMoment { order: u32, tail_index: f64 },

    #[error("demand {demand} outside the attainable interval ({lower}, {upper})")]
    DemandOutOfRange { demand: f64, lower: f64, upper: f64 },

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("insufficient tail: {available} observations, floor is {floor}")]
    InsufficientTail { available: usize, floor: usize },

    #[error("sample too small: {size} observations, need at least {required}")]
    SampleTooSmall { size: usize, required: usize },

    #[error("nonpositive sample value {value} at index {index}")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("GB2 maximum likelihood did not converge: {diagnostics}")]
    Gb2NotConverged {
        diagnostics: String,
        best: Option<crate::fitting::Gb2Params>,
        best_log_likelihood: f64,
    },

    #[error("cutoff closure did not converge after {iterations} iterations (last iterates {trace:?})")]
    ClosureNotConverged { iterations: usize, trace: Vec<f64> },

    #[error("population explosion: a_plus = {a_plus} >= a_minus = {a_minus}")]
    PopulationExplosion { a_plus: f64, a_minus: f64 },

    #[error("poor power-law fit: R^2 = {r_squared:.6} below {threshold} (slope {slope:.4})")]
    PoorFit {
        r_squared: f64,
        threshold: f64,
        slope: f64,
    },

    #[error("inconsistent Pareto indices: worker index {mu_w} must exceed firm index {mu_f}")]
    InconsistentIndices { mu_f: f64, mu_w: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
