//! Truncated linear regression with unknown noise variance.
//!
//! Observations `(x, y)` with `y = wᵀx + ε`, `ε ~ N(0, σ²)`, are only seen
//! when `y` falls in a known set `S`. The estimator runs projected SGD on the
//! negative log-likelihood in the natural parameters `v = w/σ²`, `λ = 1/σ²`,
//! where it is convex, and [`inference`] turns the fit into an asymptotic
//! confidence region for `(w, σ²)`.

pub mod data;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod likelihood;
pub mod linalg;
pub mod projection;
pub mod synth;
pub mod truncset;

pub use data::{Dataset, Sample};
pub use error::{Error, Result};
pub use estimator::{boost, fit, Diagnostics, EarlyStop, FitConfig, FitResult, Schedule, ZetaChoice};
pub use inference::{asymptotic_covariance, confidence_region, AsymptoticCovariance, ConfidenceRegion, InferenceOptions};
pub use likelihood::{GradientVector, ModelParams, NaturalParams};
pub use linalg::DenseMatrix;
pub use projection::{build_domain, ProjectionDomain};
pub use synth::{generate, GenConfig, GeneratedData, OlsBaseline, WStar, XDist};
pub use truncset::{Interval, TruncatedNormal, TruncationSet};
