use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model definition: {0}")]
    Definition(String),

    #[error("expression parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown parameter `{name}` (valid: {valid})")]
    UnknownParameter { name: String, valid: String },

    #[error("stiffness failure at t = {t} ms: step size {h:e} underflow")]
    Stiffness { t: f64, h: f64, state: Vec<f64> },

    #[error("non-finite state at t = {t} ms")]
    Divergence { t: f64, state: Vec<f64> },

    #[error("step budget of {0} steps exhausted")]
    StepBudget(usize),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("no convergence: {msg} (residual {residual:e})")]
    Convergence { msg: String, residual: f64 },

    #[error("eigenvalue iteration did not converge after {0} iterations")]
    Eigen(usize),

    #[error("degenerate cycle: period {0} ms")]
    DegenerateCycle(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::Divergence { .. }
                | Error::StepBudget(_)
                | Error::Convergence { .. }
                | Error::Eigen(_)
                | Error::DegenerateCycle(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
