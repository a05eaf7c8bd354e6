use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("problem too large for this solver: {0}")]
    TooLarge(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("no physical steady state: {0}")]
    NoPhysicalRoot(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("trajectory failed: {0}")]
    Trajectory(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
