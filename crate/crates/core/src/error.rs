use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("diffeomorphism is not orientation preserving: min F' = {min_derivative:e}")]
    NotOrientationPreserving { min_derivative: f64 },

    #[error("density weights do not chain: output {output} of the right factor vs input {input} of the left factor")]
    WeightMismatch { output: f64, input: f64 },

    #[error("operator must be monic (leading coefficient 1), deviation {deviation:e}")]
    NotMonic { deviation: f64 },

    #[error("{group} requires {parity} order, got n = {n}")]
    ParityMismatch { group: &'static str, parity: &'static str, n: usize },

    #[error("operator is not in the required class: {0}")]
    ClassViolation(String),

    #[error("curve is degenerate at sample {sample} (frame determinant {det:e})")]
    DegenerateCurve { sample: usize, det: f64 },

    #[error("connection is not in the level set: {0}")]
    NotInLevelSet(String),

    #[error("quasi-periodicity residual {residual:e} exceeds tolerance {tol:e}")]
    NotQuasiPeriodic { residual: f64, tol: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
