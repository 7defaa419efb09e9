//! Asymptotic covariance of the PSGD estimate and confidence regions.
//!
//! With `η_t = 1/(ζt)` the last iterate satisfies
//! `√n (θ̂ - θ*) → N(0, Σ/ζ)` in natural parameters, where `Σ` solves
//! `(H - ζ/2·I)Σ + Σ(H - ζ/2·I) = C` and `C` is the covariance of one
//! stochastic gradient at the optimum. The map `(v, λ) ↦ (v/λ, 1/λ)` carries
//! this to `(w, σ²)` with Jacobian `J = R⁻¹`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitResult};
use crate::likelihood::{empirical_hessian, gamma_matrix, ModelParams};
use crate::linalg::{chi2_quantile, solve_lyapunov, sym_eig, DenseMatrix};
use crate::synth::{generate, GenConfig};
use crate::truncset::TruncationSet;

/// `Σ` is treated as singular when its smallest eigenvalue is below this
/// fraction of its largest.
pub const SIGMA_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOptions {
    /// Add the rejection-sampling variance `Ĥ/batch` to `Γ`, so the Lyapunov
    /// right-hand side is the full covariance of the stochastic gradient
    /// PSGD actually used. With `false` only `Γ` is used.
    pub include_sampling_noise: bool,
    /// Use `RᵀΣR` instead of `RᵀΣ⁻¹R` for the region's shape. Kept for
    /// comparison only; it does not have the nominal coverage.
    pub unscaled_sigma_shape: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self { include_sampling_noise: true, unscaled_sigma_shape: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    pub center: ModelParams,
    /// Covariance of `√n·((ŵ, σ̂²) - (w*, σ*²))`: `J (Σ/ζ) Jᵀ`.
    pub s_matrix: DenseMatrix,
    /// Lyapunov solution in natural parameters.
    pub sigma: DenseMatrix,
    /// `∂(v, λ)/∂(w, σ²) = [[I/σ², -w/σ⁴], [0, -1/σ⁴]]`.
    pub r: DenseMatrix,
    pub hessian: DenseMatrix,
    /// Right-hand side of the Lyapunov equation.
    pub gamma: DenseMatrix,
    pub zeta: f64,
    pub options: InferenceOptions,
}

/// `{θ : (θ - center)ᵀ M (θ - center) ≤ radius}` with `θ = (w, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub center: ModelParams,
    pub shape: DenseMatrix,
    pub radius: f64,
    pub alpha: f64,
    pub n: usize,
    pub zeta: f64,
}

/// `R = ∂(v, λ)/∂(w, σ²)` at `(w, σ²)`.
pub fn reparam_jacobian_inverse(p: &ModelParams) -> DenseMatrix {
    let k = p.dim();
    let s2 = p.sigma_sq;
    let s4 = s2 * s2;
    let mut r = DenseMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        r[(i, i)] = 1.0 / s2;
        r[(i, k)] = -p.w[i] / s4;
    }
    r[(k, k)] = -1.0 / s4;
    r
}

/// `J = ∂(w, σ²)/∂(v, λ) = [[σ²I, -wσ²], [0, -σ⁴]]`, the inverse of `R`.
pub fn reparam_jacobian(p: &ModelParams) -> DenseMatrix {
    let k = p.dim();
    let s2 = p.sigma_sq;
    let mut j = DenseMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        j[(i, i)] = s2;
        j[(i, k)] = -p.w[i] * s2;
    }
    j[(k, k)] = -s2 * s2;
    j
}

/// Plug-in asymptotic covariance at the fitted point, with `Ĥ` and `Γ`
/// evaluated on `part3`.
pub fn asymptotic_covariance(
    result: &FitResult,
    part3: &Dataset,
    set: &TruncationSet,
    batch: usize,
    options: InferenceOptions,
) -> Result<AsymptoticCovariance> {
    let zeta = result
        .zeta_used
        .ok_or_else(|| Error::InvalidConfig("fit result carries no zeta".into()))?;
    let h = empirical_hessian(&result.natural, part3, set)?;
    let mut gamma = gamma_matrix(&result.natural, part3, set)?;
    if options.include_sampling_noise {
        if batch == 0 {
            return Err(Error::InvalidConfig("batch must be at least 1".into()));
        }
        gamma = gamma.add(&h.scaled(1.0 / batch as f64))?;
    }
    covariance_from_parts(&result.params, h, gamma, zeta, options)
}

/// [`asymptotic_covariance`] from an explicit Hessian and gradient covariance.
pub fn covariance_from_parts(
    center: &ModelParams,
    hessian: DenseMatrix,
    gamma: DenseMatrix,
    zeta: f64,
    options: InferenceOptions,
) -> Result<AsymptoticCovariance> {
    let d = center.dim() + 1;
    if hessian.rows() != d || gamma.rows() != d {
        return Err(Error::DimensionMismatch(format!(
            "parameters need {d}x{d} matrices, got {}x{} and {}x{}",
            hessian.rows(),
            hessian.cols(),
            gamma.rows(),
            gamma.cols()
        )));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidConfig(format!("zeta must be positive, got {zeta}")));
    }
    let h_min = sym_eig(&hessian)?.min_value();
    if !(h_min - 0.5 * zeta > 0.0) {
        return Err(Error::InferencePrecondition { zeta, min_hessian_eigenvalue: h_min });
    }
    let m = hessian.shift_diag(-0.5 * zeta);
    let sigma = solve_lyapunov(&m, &gamma)?;
    let j = reparam_jacobian(center);
    let s_matrix = j.matmul(&sigma)?.matmul(&j.transpose())?.scaled(1.0 / zeta).symmetrized();
    Ok(AsymptoticCovariance {
        center: center.clone(),
        s_matrix,
        sigma,
        r: reparam_jacobian_inverse(center),
        hessian,
        gamma,
        zeta,
        options,
    })
}

/// Region `(θ - θ̂)ᵀ RᵀΣ⁻¹R (θ - θ̂) ≤ q/(ζn)` with `q` the `1 - alpha`
/// quantile of `χ²_{k+1}` and `n` the effective number of PSGD steps
/// ([`FitResult::effective_steps`]).
pub fn confidence_region(cov: &AsymptoticCovariance, n: usize, alpha: f64) -> Result<ConfidenceRegion> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::TooFewSamples { have: 0, need: 1 });
    }
    let eig = sym_eig(&cov.sigma)?;
    if !(eig.min_value() > SIGMA_RCOND * eig.max_value().abs()) {
        return Err(Error::SingularSigma { min_eigenvalue: eig.min_value() });
    }
    let inner = if cov.options.unscaled_sigma_shape {
        cov.sigma.clone()
    } else {
        eig.map_spectrum(|d| 1.0 / d)
    };
    let shape = cov.r.transpose().matmul(&inner)?.matmul(&cov.r)?.symmetrized();
    let k1 = cov.center.dim() + 1;
    Ok(ConfidenceRegion {
        center: cov.center.clone(),
        shape,
        radius: chi2_quantile(k1, 1.0 - alpha) / (cov.zeta * n as f64),
        alpha,
        n,
        zeta: cov.zeta,
    })
}

impl ConfidenceRegion {
    /// `(θ - center)ᵀ M (θ - center)`.
    pub fn quadratic_form(&self, candidate: &ModelParams) -> Result<f64> {
        if candidate.dim() != self.center.dim() {
            return Err(Error::DimensionMismatch(format!(
                "region has dimension {} but candidate has {}",
                self.center.dim(),
                candidate.dim()
            )));
        }
        let d: Vec<f64> = candidate
            .to_vec()
            .iter()
            .zip(self.center.to_vec())
            .map(|(a, b)| a - b)
            .collect();
        self.shape.quad_form(&d)
    }

    /// Closed region membership.
    pub fn contains(&self, candidate: &ModelParams) -> Result<bool> {
        Ok(self.quadratic_form(candidate)? <= self.radius)
    }
}

/// Free-function form of [`ConfidenceRegion::contains`].
pub fn region_contains(region: &ConfidenceRegion, candidate: &ModelParams) -> Result<bool> {
    region.contains(candidate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// `ζn·(θ* - θ̂)ᵀ M (θ* - θ̂)`; covered at level `alpha` iff it is at most
    /// the `1 - alpha` quantile of `χ²_{k+1}`.
    pub statistic: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub alpha: f64,
    pub coverage: f64,
    pub per_trial: Vec<TrialOutcome>,
    /// `(trial, message)` for trials that failed to produce a region.
    pub failures: Vec<(usize, String)>,
    pub dof: usize,
}

impl CoverageReport {
    /// Coverage of the same trials at another level.
    pub fn coverage_at(&self, alpha: f64) -> f64 {
        let q = chi2_quantile(self.dof, 1.0 - alpha);
        let hit = self.per_trial.iter().filter(|t| t.statistic <= q).count();
        hit as f64 / self.per_trial.len().max(1) as f64
    }
}

/// Generates, fits and builds a region `trials` times, recording whether the
/// truth is covered. Trials run in parallel; trial `i` uses the `i`-th seed
/// drawn from `seed`. Failed trials are excluded from the denominator.
pub fn coverage_simulation(
    gen: &GenConfig,
    fit_cfg: &FitConfig,
    trials: usize,
    alpha: f64,
    seed: u64,
    options: InferenceOptions,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("coverage needs at least one trial".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    let dof = gen.k + 1;
    let q = chi2_quantile(dof, 1.0 - alpha);

    let outcomes: Vec<std::result::Result<TrialOutcome, (usize, String)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            run_trial(gen, fit_cfg, s, options)
                .map(|statistic| TrialOutcome { trial: i, seed: s, statistic, covered: statistic <= q })
                .map_err(|e| (i, e.to_string()))
        })
        .collect();

    let mut per_trial = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => per_trial.push(t),
            Err(f) => failures.push(f),
        }
    }
    let covered = per_trial.iter().filter(|t| t.covered).count();
    let coverage = if per_trial.is_empty() { f64::NAN } else { covered as f64 / per_trial.len() as f64 };
    Ok(CoverageReport { alpha, coverage, per_trial, failures, dof })
}

fn run_trial(gen: &GenConfig, fit_cfg: &FitConfig, seed: u64, options: InferenceOptions) -> Result<f64> {
    let data = generate(&GenConfig { seed, ..gen.clone() })?;
    let cfg = FitConfig { seed: seed ^ 0x9e37_79b9_7f4a_7c15, ..fit_cfg.clone() };
    let result = fit(&data.dataset, &gen.set, &cfg)?;
    let cov = asymptotic_covariance(&result, &result.psgd_data, &gen.set, cfg.batch, options)?;
    let region = confidence_region(&cov, result.effective_steps(), 0.5)?;
    Ok(region.quadratic_form(&data.truth)? * region.zeta * region.n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::NaturalParams;

    fn params(w: &[f64], s2: f64) -> ModelParams {
        ModelParams::new(w.to_vec(), s2).unwrap()
    }

    #[test]
    fn lyapunov_identity_case() {
        let c = params(&[], 1.0);
        let cov = covariance_from_parts(&c, DenseMatrix::identity(1), DenseMatrix::identity(1), 1.0, InferenceOptions::default())
            .unwrap();
        assert!((cov.sigma[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn r_at_unit_variance() {
        let r = reparam_jacobian_inverse(&params(&[0.0, 0.0], 1.0));
        let expected = DenseMatrix::from_diag(&[1.0, 1.0, -1.0]);
        assert_eq!(r, expected);
    }

    #[test]
    fn jacobians_are_inverse_and_match_finite_differences() {
        let p = params(&[0.7, -1.3], 2.5);
        let j = reparam_jacobian(&p);
        let r = reparam_jacobian_inverse(&p);
        let prod = j.matmul(&r).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-14);

        // R = ∂(v, λ)/∂(w, σ²) column by column.
        let h = 1e-6;
        let theta = p.to_vec();
        for c in 0..3 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[c] += h;
            dn[c] -= h;
            let fu = ModelParams::from_slice(&up).unwrap().to_natural().to_vec();
            let fd = ModelParams::from_slice(&dn).unwrap().to_natural().to_vec();
            for row in 0..3 {
                let d = (fu[row] - fd[row]) / (2.0 * h);
                assert!((d - r[(row, c)]).abs() < 1e-6, "R[{row},{c}]");
            }
        }
    }

    #[test]
    fn precondition_failure_reports_zeta() {
        let c = params(&[0.0], 1.0);
        let h = DenseMatrix::from_diag(&[0.4, 2.0]);
        match covariance_from_parts(&c, h, DenseMatrix::identity(2), 1.0, InferenceOptions::default()) {
            Err(Error::InferencePrecondition { zeta, min_hessian_eigenvalue }) => {
                assert_eq!(zeta, 1.0);
                assert!((min_hessian_eigenvalue - 0.4).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn region_fixture(k: usize) -> AsymptoticCovariance {
        let w: Vec<f64> = (0..k).map(|i| 0.3 * i as f64 - 0.2).collect();
        let c = params(&w, 1.7);
        let b = DenseMatrix::from_fn(k + 1, k + 1, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1);
        let h = b.transpose().matmul(&b).unwrap().shift_diag(1.0);
        let g = h.shift_diag(0.2);
        covariance_from_parts(&c, h, g, 0.5, InferenceOptions::default()).unwrap()
    }

    #[test]
    fn region_radius_and_center() {
        let cov = region_fixture(1);
        let r1 = confidence_region(&cov, 1000, 0.05).unwrap();
        assert!((r1.radius * 0.5 * 1000.0 - 5.991_464_547).abs() < 1e-6);
        let r2 = confidence_region(&cov, 2000, 0.05).unwrap();
        assert!((r2.radius - 0.5 * r1.radius).abs() <= 1e-15 * r1.radius);
        assert!(r1.contains(&r1.center).unwrap());
        let wider = confidence_region(&cov, 1000, 0.01).unwrap();
        assert!(wider.radius > r1.radius);
        assert_eq!(wider.shape, r1.shape);
    }

    #[test]
    fn s_matrix_is_symmetric_psd_and_consistent_with_shape() {
        let cov = region_fixture(3);
        let e = sym_eig(&cov.s_matrix).unwrap();
        assert!(e.min_value() >= -1e-8 * cov.s_matrix.trace());
        // M = (ζ·S)⁻¹ because S = J(Σ/ζ)Jᵀ and M = RᵀΣ⁻¹R with R = J⁻¹.
        let region = confidence_region(&cov, 10, 0.1).unwrap();
        let prod = region.shape.matmul(&cov.s_matrix.scaled(cov.zeta)).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-9);
        let residual = {
            let m = cov.hessian.shift_diag(-0.5 * cov.zeta);
            m.matmul(&cov.sigma).unwrap().add(&cov.sigma.matmul(&m).unwrap()).unwrap().sub(&cov.gamma).unwrap().max_abs()
        };
        assert!(residual <= 1e-8 * cov.gamma.max_abs());
    }

    #[test]
    fn membership_edges() {
        let center = params(&[0.0], 1.0);
        let region = ConfidenceRegion {
            center: center.clone(),
            shape: DenseMatrix::identity(2),
            radius: 1.0,
            alpha: 0.1,
            n: 1,
            zeta: 1.0,
        };
        assert!(region.contains(&center).unwrap());
        assert!(!region.contains(&params(&[2.0], 1.0)).unwrap());
        assert!(region.contains(&params(&[1.0], 1.0)).unwrap());
        assert!(region.contains(&params(&[0.0, 1.0], 1.0)).is_err());

        let everything = ConfidenceRegion { shape: DenseMatrix::zeros(2, 2), ..region };
        assert!(everything.contains(&params(&[1e6], 1e3)).unwrap());
    }

    #[test]
    fn singular_sigma_is_rejected() {
        let mut cov = region_fixture(1);
        cov.sigma = DenseMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(confidence_region(&cov, 10, 0.1), Err(Error::SingularSigma { .. })));
    }

    #[test]
    fn fitted_covariance_residual() {
        use crate::estimator::Schedule;
        use crate::synth::{WStar, XDist};
        let gen = GenConfig {
            k: 2,
            n_observed: 900,
            w_star: WStar::Ones,
            sigma_star_sq: 1.0,
            x_dist: XDist::NormalizedStandardNormal,
            set: TruncationSet::left_truncated(0.0),
            seed: 4,
            max_world_draws: None,
        };
        let data = generate(&gen).unwrap();
        let cfg = FitConfig {
            schedule: Schedule::strongly_convex_auto(),
            steps: 300,
            ..FitConfig::default()
        };
        let r = fit(&data.dataset, &gen.set, &cfg).unwrap();
        let cov = asymptotic_covariance(&r, &r.psgd_data, &gen.set, 1, InferenceOptions::default()).unwrap();
        let m = cov.hessian.shift_diag(-0.5 * cov.zeta);
        let res = m.matmul(&cov.sigma).unwrap().add(&cov.sigma.matmul(&m).unwrap()).unwrap().sub(&cov.gamma).unwrap();
        assert!(res.max_abs() <= 1e-8 * cov.gamma.max_abs());
        let p: &NaturalParams = &r.natural;
        assert!(r.domain.contains(&p.v, p.lambda));
    }
}
