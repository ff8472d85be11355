use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size underflow at t = {t:.6} h (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("event bracketing failed near t = {t:.6} h: {reason}")]
    EventBracketing { t: f64, reason: String },

    #[error("sliding detected on a switching boundary at t = {t:.6} h (product {product:e})")]
    Sliding { t: f64, product: f64 },

    #[error("no fold found for c = {c}: {reason}")]
    NoFold { c: f64, reason: String },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("no sleep onset within {days} days")]
    NoSleepOnset { days: f64 },

    #[error("event at t = {event} precedes its circadian minimum at t = {minimum}")]
    EventBeforeMinimum { event: f64, minimum: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("unresolvable: {0}")]
    Unresolvable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
