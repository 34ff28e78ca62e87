use thiserror::Error;

/// Errors produced by model construction, synthesis, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "behavior policy has zero probability on the taken action at step {t} \
         (state {state}, action {action})"
    )]
    ZeroBehaviorProbability { t: usize, state: usize, action: usize },

    #[error(
        "behavior policy is outside the enlarged search space at (t={t}, state={state}, \
         action={action}): zero behavior probability on an action with nonzero target-weighted value"
    )]
    OutsideEnlargedSpace { t: usize, state: usize, action: usize },

    #[error("enumeration would visit about {leaves:.3e} branches, above the cap {cap:.3e}")]
    EnumerationCapExceeded { leaves: f64, cap: f64 },

    #[error("state problem infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure at (t={t}, state={state}): {message}")]
    Solver { t: usize, state: usize, message: String },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
