use thiserror::Error;

use crate::estimator::Diagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid truncation set: {0}")]
    InvalidSet(String),

    #[error("Monte-Carlo survival estimate requested with a zero draw budget")]
    ZeroBudget,

    #[error("truncated normal has no usable mass on the set (mass {mass:e})")]
    EmptyMass { mass: f64 },

    #[error("rejection sampler exhausted its budget of {max_attempts} attempts")]
    RejectionBudgetExceeded { max_attempts: usize },

    #[error("operation requires an interval-union truncation set: {0}")]
    OracleUnsupported(&'static str),

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error(
        "(H - zeta/2 I) is not positive definite: zeta = {zeta:e}, min eigenvalue of H = {min_hessian_eigenvalue:e}; rerun with a smaller zeta"
    )]
    InferencePrecondition { zeta: f64, min_hessian_eigenvalue: f64 },

    #[error("asymptotic Lyapunov solution is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularSigma { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("survival lower bound must lie in (0, 1), got {0}")]
    InvalidSurvivalBound(f64),

    #[error("too few samples: have {have}, need at least {need}")]
    TooFewSamples { have: usize, need: usize },

    #[error("initial variance estimate is degenerate ({0:e}); residuals are all zero")]
    DegenerateVariance(f64),

    #[error("data generator exceeded {max_world_draws} world draws with {accepted} of {requested} samples kept")]
    WorldBudgetExceeded {
        max_world_draws: usize,
        accepted: usize,
        requested: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("PSGD aborted at step {step}: {source}")]
    FitAborted {
        step: usize,
        diagnostics: Box<Diagnostics>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by the rejection sampler running out of budget,
    /// including ones wrapped by an aborted fit.
    pub fn is_sampling_budget(&self) -> bool {
        match self {
            Error::RejectionBudgetExceeded { .. } => true,
            Error::FitAborted { source, .. } => source.is_sampling_budget(),
            _ => false,
        }
    }

    /// True for design/degeneracy failures of the input data.
    pub fn is_data_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign
                | Error::DegenerateVariance(_)
                | Error::TooFewSamples { .. }
                | Error::EmptyMass { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidSet(_)
                | Error::OracleUnsupported(_)
                | Error::WorldBudgetExceeded { .. }
        )
    }

    /// True for failures of the asymptotic-inference preconditions.
    pub fn is_inference_precondition(&self) -> bool {
        matches!(
            self,
            Error::InferencePrecondition { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularSigma { .. }
        )
    }
}
