use thiserror::Error;

/// Errors produced by solver, model construction and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypergeometric argument out of range: z = {z} (need 0 <= z < 1)")]
    HypergeometricDomain { z: f64 },

    #[error("mortality table error: {0}")]
    Mortality(String),

    #[error("survival exhausted: no survivors remain at step {step}")]
    SurvivalExhausted { step: usize },

    #[error(
        "budget {budget} is below the minimum affordable level {floor} \
         (consumption floor plus cheapest continuation)"
    )]
    MinimumBudget { budget: f64, floor: f64 },

    #[error("root finding failed: {0}")]
    RootFind(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
