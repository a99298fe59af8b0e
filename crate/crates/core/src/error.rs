use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("controller covariance at t={t} is not positive definite")]
    ControllerInvalid { t: usize },

    #[error("rollout diverged at t={t}")]
    Divergence { t: usize },

    #[error("non-finite cost expansion in rollout {rollout} at t={t}")]
    NonFiniteExpansion { rollout: usize, t: usize },

    #[error("Q_uu not positive definite at t={t} after {escalations} regularization steps")]
    Solver { t: usize, escalations: usize },

    #[error("demonstration failed to satisfy the success predicate (final state {final_state:?})")]
    DemoFailed { final_state: Vec<f64> },

    #[error("training aborted after {completed} iterations: {reason}")]
    TrainingAborted { completed: usize, reason: String },

    #[error("MLP training diverged at epoch {epoch} (loss {loss}); try a smaller learning rate")]
    MlpDiverged { epoch: usize, loss: f64 },

    #[error("too many rollouts diverged while generating cloning data ({skipped}/{total})")]
    DatasetDiverged { skipped: usize, total: usize },

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
