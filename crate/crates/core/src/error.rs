use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors returned by the solver, certificate and inference layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid mismatch: {0}")]
    SpecMismatch(String),

    #[error("tau*G0 = {0} >= 1 violates resolvent admissibility")]
    TauTooLarge(f64),

    #[error("resolvent did not converge at epsilon = {epsilon:e} after {iterations} iterations (L1 residual {residual:e})")]
    NonConvergence {
        epsilon: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("evolution step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("forward solve failed at gamma = {gamma}: {source}")]
    Forward { gamma: f64, source: Box<Error> },

    #[error("finite-difference step reached {delta_min:e} without two-scale agreement (relative disagreement {agreement:e})")]
    StepUnderflow { delta_min: f64, agreement: f64 },

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("window [{lo:?}, {hi:?}] is not aligned to grid cells; nearest aligned window is [{nearest_lo:?}, {nearest_hi:?}]")]
    UnalignedWindow {
        lo: Vec<f64>,
        hi: Vec<f64>,
        nearest_lo: Vec<f64>,
        nearest_hi: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors raised by the nonlinear solver rather than by bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::StepUnderflow { .. } => true,
            Error::StepFailed { source, .. } | Error::Forward { source, .. } => {
                source.is_solver_failure()
            }
            _ => false,
        }
    }
}
