//! Per-sample negative log-likelihood in natural parameters and its
//! derivatives.
//!
//! With `v = w/σ²` and `λ = 1/σ²` the truncated density of `y` given `x` is
//! an exponential family with sufficient statistics `(y·x, -y²/2)`:
//!
//! ```text
//! ℓ(v, λ; x, y) = ½(λy² - 2y·vᵀx) + log ∫_S exp(-½(λz² - 2z·vᵀx)) dz
//! ```
//!
//! so gradients and Hessians are moments of `Q_x = N(vᵀx/λ, 1/λ, S)`.

use rand::Rng;

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::linalg::special::LN_SQRT_2PI;
use crate::linalg::{dot, norm2, DenseMatrix};
use crate::truncset::{TruncatedMoments, TruncatedNormal, TruncationSet, MASS_FLOOR};

/// Natural parameters `(v, λ) = (w/σ², 1/σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    pub v: Vec<f64>,
    pub lambda: f64,
}

/// Model parameters `(w, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w: Vec<f64>,
    pub sigma_sq: f64,
}

impl NaturalParams {
    pub fn new(v: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid natural parameters (lambda = {lambda})")));
        }
        Ok(Self { v, lambda })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn to_model(&self) -> ModelParams {
        ModelParams {
            w: self.v.iter().map(|x| x / self.lambda).collect(),
            sigma_sq: 1.0 / self.lambda,
        }
    }

    /// `(v₁, …, v_k, λ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.v.clone();
        out.push(self.lambda);
        out
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        let (lambda, v) = theta
            .split_last()
            .ok_or_else(|| Error::DimensionMismatch("empty parameter vector".into()))?;
        Self::new(v.to_vec(), *lambda)
    }

    /// Location and scale of `Q_x`.
    pub fn location_scale(&self, x: &[f64]) -> (f64, f64) {
        (dot(&self.v, x) / self.lambda, self.lambda.sqrt().recip())
    }
}

impl ModelParams {
    pub fn new(w: Vec<f64>, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid model parameters (sigma2 = {sigma_sq})")));
        }
        Ok(Self { w, sigma_sq })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn to_natural(&self) -> NaturalParams {
        NaturalParams {
            v: self.w.iter().map(|x| x / self.sigma_sq).collect(),
            lambda: 1.0 / self.sigma_sq,
        }
    }

    /// `(w₁, …, w_k, σ²)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.w.clone();
        out.push(self.sigma_sq);
        out
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        let (s, w) = theta
            .split_last()
            .ok_or_else(|| Error::DimensionMismatch("empty parameter vector".into()))?;
        Self::new(w.to_vec(), *s)
    }
}

/// Gradient of `ℓ` with respect to `(v, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub dv: Vec<f64>,
    pub dlambda: f64,
}

impl GradientVector {
    pub fn zeros(k: usize) -> Self {
        Self { dv: vec![0.0; k], dlambda: 0.0 }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.dv.clone();
        out.push(self.dlambda);
        out
    }

    pub fn norm(&self) -> f64 {
        (norm2(&self.dv).powi(2) + self.dlambda * self.dlambda).sqrt()
    }

    fn from_moments(x: &[f64], y: f64, m1: f64, m2: f64) -> Self {
        Self {
            dv: x.iter().map(|xi| (m1 - y) * xi).collect(),
            dlambda: 0.5 * (y * y - m2),
        }
    }

    fn add_scaled(&mut self, other: &GradientVector, s: f64) {
        for (a, b) in self.dv.iter_mut().zip(&other.dv) {
            *a += s * b;
        }
        self.dlambda += s * other.dlambda;
    }
}

fn check_dims(p: &NaturalParams, x: &[f64]) -> Result<()> {
    if p.v.len() == x.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "parameters have dimension {} but features have {}",
            p.v.len(),
            x.len()
        )))
    }
}

fn moments(p: &NaturalParams, x: &[f64], set: &TruncationSet) -> Result<TruncatedMoments> {
    check_dims(p, x)?;
    let (mean, sigma) = p.location_scale(x);
    TruncatedNormal::new(mean, sigma, set)?.moments()
}

/// Negative log-likelihood of one sample; needs an interval-union set.
pub fn nll(p: &NaturalParams, s: Sample<'_>, set: &TruncationSet) -> Result<f64> {
    check_dims(p, s.x)?;
    let lambda = p.lambda;
    let u = dot(&p.v, s.x);
    let (mean, sigma) = p.location_scale(s.x);
    let log_alpha = set.log_interval_survival(mean, sigma)?;
    if log_alpha < MASS_FLOOR.ln() {
        return Err(Error::EmptyMass { mass: log_alpha.exp() });
    }
    // log-partition: ½log(2π/λ) + u²/(2λ) + log α
    Ok(0.5 * (lambda * s.y * s.y - 2.0 * s.y * u) + LN_SQRT_2PI - 0.5 * lambda.ln()
        + u * u / (2.0 * lambda)
        + log_alpha)
}

/// Mean of [`nll`] over a dataset.
pub fn mean_nll(p: &NaturalParams, data: &Dataset, set: &TruncationSet) -> Result<f64> {
    non_empty(data)?;
    let mut total = 0.0;
    for s in data.iter() {
        total += nll(p, s, set)?;
    }
    Ok(total / data.len() as f64)
}

/// Exact per-sample gradient `((m1 - y)x, ½(y² - m2))` from the moments of `Q_x`.
pub fn grad_exact(p: &NaturalParams, s: Sample<'_>, set: &TruncationSet) -> Result<GradientVector> {
    let m = moments(p, s.x, set)?;
    Ok(GradientVector::from_moments(s.x, s.y, m.m1(), m.m2()))
}

/// Mean of [`grad_exact`] over a dataset.
pub fn mean_grad_exact(p: &NaturalParams, data: &Dataset, set: &TruncationSet) -> Result<GradientVector> {
    non_empty(data)?;
    let mut acc = GradientVector::zeros(p.dim());
    let w = 1.0 / data.len() as f64;
    for s in data.iter() {
        acc.add_scaled(&grad_exact(p, s, set)?, w);
    }
    Ok(acc)
}

/// Unbiased gradient estimate from `batch` rejection draws `z ~ Q_x`.
///
/// Works for oracle sets too. Each draw resamples until it lands in `S`, so
/// the batch is never empty.
pub fn grad_stochastic<R: Rng + ?Sized>(
    p: &NaturalParams,
    s: Sample<'_>,
    set: &TruncationSet,
    rng: &mut R,
    batch: usize,
    max_attempts: usize,
) -> Result<GradientVector> {
    grad_stochastic_counted(p, s, set, rng, batch, max_attempts).map(|(g, _)| g)
}

/// [`grad_stochastic`] plus the total number of normal draws consumed.
pub fn grad_stochastic_counted<R: Rng + ?Sized>(
    p: &NaturalParams,
    s: Sample<'_>,
    set: &TruncationSet,
    rng: &mut R,
    batch: usize,
    max_attempts: usize,
) -> Result<(GradientVector, usize)> {
    check_dims(p, s.x)?;
    if batch == 0 {
        return Err(Error::InvalidConfig("batch must be at least 1".into()));
    }
    let (mean, sigma) = p.location_scale(s.x);
    let tn = TruncatedNormal::new(mean, sigma, set)?;
    let (mut z1, mut z2, mut draws) = (0.0, 0.0, 0);
    for _ in 0..batch {
        let (z, attempts) = tn.sample_counted(rng, max_attempts)?;
        z1 += z;
        z2 += z * z;
        draws += attempts;
    }
    let b = batch as f64;
    Ok((GradientVector::from_moments(s.x, s.y, z1 / b, z2 / b), draws))
}

/// Average Hessian of `ℓ` over the data: the covariance of the sufficient
/// statistics `(z·x, -z²/2)` under `Q_x`,
///
/// ```text
/// [ Var(z)·xxᵀ          -Cov(½z², z)·x ]
/// [ -Cov(½z², z)·xᵀ      Var(½z²)      ]
/// ```
pub fn empirical_hessian(p: &NaturalParams, data: &Dataset, set: &TruncationSet) -> Result<DenseMatrix> {
    non_empty(data)?;
    let k = p.dim();
    let mut h = DenseMatrix::zeros(k + 1, k + 1);
    for s in data.iter() {
        let m = moments(p, s.x, set)?;
        let var = m.var;
        let cross = -0.5 * m.cov_sq_z();
        let tail = 0.25 * m.var_sq();
        for a in 0..k {
            for b in a..k {
                h[(a, b)] += var * s.x[a] * s.x[b];
            }
            h[(a, k)] += cross * s.x[a];
        }
        h[(k, k)] += tail;
    }
    let inv_n = 1.0 / data.len() as f64;
    for a in 0..=k {
        for b in a..=k {
            let val = h[(a, b)] * inv_n;
            h[(a, b)] = val;
            h[(b, a)] = val;
        }
    }
    Ok(h)
}

/// `Γ = (1/n) Σ gᵢgᵢᵀ` with `gᵢ` the exact per-sample gradient.
pub fn gamma_matrix(p: &NaturalParams, data: &Dataset, set: &TruncationSet) -> Result<DenseMatrix> {
    non_empty(data)?;
    let d = p.dim() + 1;
    let mut g = DenseMatrix::zeros(d, d);
    for s in data.iter() {
        let gi = grad_exact(p, s, set)?.to_vec();
        for a in 0..d {
            for b in a..d {
                g[(a, b)] += gi[a] * gi[b];
            }
        }
    }
    let inv_n = 1.0 / data.len() as f64;
    for a in 0..d {
        for b in a..d {
            let val = g[(a, b)] * inv_n;
            g[(a, b)] = val;
            g[(b, a)] = val;
        }
    }
    Ok(g)
}

fn non_empty(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        Err(Error::TooFewSamples { have: 0, need: 1 })
    } else {
        Ok(())
    }
}
