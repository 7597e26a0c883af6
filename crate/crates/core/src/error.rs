use thiserror::Error;

/// Errors produced across fitting, simulation and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unbalanced panel: {0}")]
    BalancedPanel(String),

    #[error("invalid count: {0}")]
    CountDomain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    #[error("operation not supported for this model: {0}")]
    Spec(String),

    #[error("log-likelihood is not finite at the initial point: {0}")]
    Init(String),

    #[error("standard errors are unavailable (singular Hessian)")]
    DiagnosticsUnavailable,

    #[error("invalid data: {0}")]
    Data(String),

    #[error("fewer than two goodness-of-fit cells after pooling ({0} cell)")]
    DegenerateCells(usize),

    #[error("within-chain variance is zero")]
    DegenerateVariance,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
