//! Synthetic truncated-regression data and the two experiment grids: bias
//! against OLS across noise levels, and error decay with sample size.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit, param_distance, FitConfig, Schedule};
use crate::likelihood::ModelParams;
use crate::linalg::{dist2, dot, ols_fit, residual_variance, DenseMatrix};
use crate::truncset::TruncationSet;

/// Ground-truth weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WStar {
    /// Each coordinate uniform on `[-1, 1]`.
    UniformPm1,
    Ones,
    Explicit(Vec<f64>),
}

/// Feature distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XDist {
    /// Each coordinate uniform on `[lo, hi]`.
    UniformBox { lo: f64, hi: f64 },
    StandardNormal,
    /// `g / max(1, ‖g‖)` for standard normal `g`, so `‖x‖ ≤ 1`.
    NormalizedStandardNormal,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub k: usize,
    pub n_observed: usize,
    pub w_star: WStar,
    pub sigma_star_sq: f64,
    pub x_dist: XDist,
    pub set: TruncationSet,
    pub seed: u64,
    /// Defaults to `1000 · n_observed`.
    pub max_world_draws: Option<usize>,
}

impl GenConfig {
    /// `k = 10`, `w*` uniform on `[-1, 1]ᵏ`, `x` uniform on `[-5, 5]ᵏ`, left
    /// truncation at zero.
    pub fn bias_setting(n_observed: usize, sigma_star_sq: f64, seed: u64) -> Self {
        Self {
            k: 10,
            n_observed,
            w_star: WStar::UniformPm1,
            sigma_star_sq,
            x_dist: XDist::UniformBox { lo: -5.0, hi: 5.0 },
            set: TruncationSet::left_truncated(0.0),
            seed,
            max_world_draws: None,
        }
    }

    /// `k = 10`, `w* = 1`, standard normal `x`, right truncation at zero,
    /// unit noise.
    pub fn rate_setting(n_observed: usize, seed: u64) -> Self {
        Self {
            k: 10,
            n_observed,
            w_star: WStar::Ones,
            sigma_star_sq: 1.0,
            x_dist: XDist::StandardNormal,
            set: TruncationSet::right_truncated(0.0),
            seed,
            max_world_draws: None,
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.k == 0 || self.n_observed == 0 {
            return Err(Error::InvalidConfig("k and n_observed must be at least 1".into()));
        }
        if !(self.sigma_star_sq > 0.0 && self.sigma_star_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma*^2 must be positive, got {}", self.sigma_star_sq)));
        }
        if let WStar::Explicit(w) = &self.w_star {
            if w.len() != self.k || w.iter().any(|x| !x.is_finite()) {
                return Err(Error::DimensionMismatch(format!("w* has {} entries, expected {}", w.len(), self.k)));
            }
        }
        if let XDist::UniformBox { lo, hi } = self.x_dist {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!("empty feature box [{lo}, {hi}]")));
            }
        }
        let budget = self.max_world_draws.unwrap_or(self.n_observed.saturating_mul(1000));
        if budget < self.n_observed {
            return Err(Error::InvalidConfig(format!(
                "max_world_draws {budget} is below n_observed {}",
                self.n_observed
            )));
        }
        Ok(budget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub acceptance_rate: f64,
    pub world_draws: usize,
    pub truth: ModelParams,
}

// Independent streams so w*, the feature sequence and the noise sequence do
// not depend on each other: changing σ*² keeps w* and every x fixed.
fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng, ChaCha8Rng) {
    let mk = |stream| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    (mk(0), mk(1), mk(2))
}

fn draw_x(dist: XDist, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    out.clear();
    match dist {
        XDist::UniformBox { lo, hi } => out.extend((0..k).map(|_| rng.random_range(lo..hi))),
        XDist::StandardNormal => out.extend((0..k).map(|_| rng.sample::<f64, _>(StandardNormal))),
        XDist::NormalizedStandardNormal => {
            out.extend((0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let n = out.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            out.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Ground-truth weights for a configuration.
pub fn draw_w_star(cfg: &GenConfig) -> Vec<f64> {
    match &cfg.w_star {
        WStar::Ones => vec![1.0; cfg.k],
        WStar::Explicit(w) => w.clone(),
        WStar::UniformPm1 => {
            let (mut rng, _, _) = streams(cfg.seed);
            (0..cfg.k).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    }
}

/// Draws `x`, sets `y = w*ᵀx + ε`, and keeps the pair iff `y ∈ S`, until
/// `n_observed` pairs are kept.
pub fn generate(cfg: &GenConfig) -> Result<GeneratedData> {
    let budget = cfg.validate()?;
    let w = draw_w_star(cfg);
    let sigma = cfg.sigma_star_sq.sqrt();
    let (_, mut rng_x, mut rng_e) = streams(cfg.seed);
    let k = cfg.k;

    let mut xs = Vec::with_capacity(cfg.n_observed * k);
    let mut ys = Vec::with_capacity(cfg.n_observed);
    let mut x = Vec::with_capacity(k);
    let mut world = 0;
    while ys.len() < cfg.n_observed {
        if world >= budget {
            return Err(Error::WorldBudgetExceeded {
                max_world_draws: budget,
                accepted: ys.len(),
                requested: cfg.n_observed,
            });
        }
        world += 1;
        draw_x(cfg.x_dist, k, &mut rng_x, &mut x);
        let e: f64 = rng_e.sample(StandardNormal);
        let y = dot(&w, &x) + sigma * e;
        if cfg.set.contains(y) {
            xs.extend_from_slice(&x);
            ys.push(y);
        }
    }
    let dataset = Dataset::new(DenseMatrix::from_row_major(ys.len(), k, xs), ys)?;
    Ok(GeneratedData {
        acceptance_rate: cfg.n_observed as f64 / world as f64,
        world_draws: world,
        truth: ModelParams { w, sigma_sq: cfg.sigma_star_sq },
        dataset,
    })
}

/// Draws `n` feature vectors from the configured distribution on a stream
/// unrelated to [`generate`].
pub fn sample_features(cfg: &GenConfig, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let mut x = Vec::with_capacity(cfg.k);
    let mut out = Vec::with_capacity(n * cfg.k);
    for _ in 0..n {
        draw_x(cfg.x_dist, cfg.k, &mut rng, &mut x);
        out.extend_from_slice(&x);
    }
    DenseMatrix::from_row_major(n, cfg.k, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Psgd,
    Ols,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Psgd => "PSGD",
            Method::Ols => "OLS",
        }
    }
}

/// How the OLS comparison is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OlsBaseline {
    /// Regress on `(1, x)` and report the slope part. With symmetric
    /// features and truncation at zero, only this variant shows the
    /// truncation bias; without an intercept the bias cancels by symmetry.
    #[default]
    WithIntercept,
    NoIntercept,
}

/// PSGD settings for the bias grid. Features on `[-5, 5]ᵏ` make per-sample
/// gradients large, and the default `c = 0.1` throws early iterates to where
/// rejection sampling cannot produce a draw.
pub fn bias_fit_config() -> FitConfig {
    FitConfig { schedule: Schedule::SqrtDecay { c: 5e-4 }, steps: 30_000, ..FitConfig::default() }
}

/// PSGD settings for the sample-size grid: 2500 steps at every `n`.
pub fn rate_fit_config() -> FitConfig {
    FitConfig { schedule: Schedule::SqrtDecay { c: 3e-3 }, steps: 2500, ..FitConfig::default() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub sigma_star_sq: f64,
    pub method: Method,
    pub seed: u64,
    pub w_error: f64,
    pub sigma_error: f64,
    /// Error message when the cell failed; the errors are then NaN.
    pub failed: Option<String>,
}

/// For every `(σ*², seed)` cell: generate once, fit PSGD and OLS (on all
/// observed data, with an intercept), and record `‖ŵ - w*‖₂` and
/// `|σ̂² - σ*²|`. Rows come in grid order, PSGD before OLS. The seed fixes
/// `w*` and the feature sequence across noise levels.
pub fn experiment_fig1(seeds: &[u64], sigma_grid: &[f64], base: &GenConfig, fit_cfg: &FitConfig) -> Result<Vec<Fig1Row>> {
    experiment_fig1_with(seeds, sigma_grid, base, fit_cfg, OlsBaseline::default())
}

/// [`experiment_fig1`] with a chosen OLS variant.
pub fn experiment_fig1_with(
    seeds: &[u64],
    sigma_grid: &[f64],
    base: &GenConfig,
    fit_cfg: &FitConfig,
    baseline: OlsBaseline,
) -> Result<Vec<Fig1Row>> {
    if seeds.is_empty() || sigma_grid.is_empty() {
        return Err(Error::InvalidConfig("experiment grids must be non-empty".into()));
    }
    let cells: Vec<(f64, u64)> = sigma_grid.iter().flat_map(|&s| seeds.iter().map(move |&d| (s, d))).collect();
    let rows: Vec<[Fig1Row; 2]> = cells
        .par_iter()
        .map(|&(s2, seed)| {
            let row = |method, out: &std::result::Result<ModelParams, String>, truth: Option<&ModelParams>| match (out, truth) {
                (Ok(p), Some(t)) => Fig1Row {
                    sigma_star_sq: s2,
                    method,
                    seed,
                    w_error: dist2(&p.w, &t.w),
                    sigma_error: (p.sigma_sq - t.sigma_sq).abs(),
                    failed: None,
                },
                (Err(e), _) => failed_row(s2, method, seed, e.clone()),
                (Ok(_), None) => failed_row(s2, method, seed, "generation failed".into()),
            };
            let gen = GenConfig { sigma_star_sq: s2, seed, ..base.clone() };
            match generate(&gen) {
                Ok(data) => {
                    let cfg = FitConfig { seed, ..fit_cfg.clone() };
                    let psgd = fit(&data.dataset, &gen.set, &cfg).map(|r| r.params).map_err(|e| e.to_string());
                    let ols = ols_baseline(&data.dataset, baseline).map_err(|e| e.to_string());
                    [row(Method::Psgd, &psgd, Some(&data.truth)), row(Method::Ols, &ols, Some(&data.truth))]
                }
                Err(e) => [
                    failed_row(s2, Method::Psgd, seed, e.to_string()),
                    failed_row(s2, Method::Ols, seed, e.to_string()),
                ],
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn failed_row(sigma_star_sq: f64, method: Method, seed: u64, msg: String) -> Fig1Row {
    Fig1Row { sigma_star_sq, method, seed, w_error: f64::NAN, sigma_error: f64::NAN, failed: Some(msg) }
}

/// OLS weights and mean squared residual on all rows, ignoring truncation.
pub fn ols_baseline(data: &Dataset, baseline: OlsBaseline) -> Result<ModelParams> {
    match baseline {
        OlsBaseline::NoIntercept => {
            let w = ols_fit(data.x(), data.y())?;
            let s2 = residual_variance(data.x(), data.y(), &w)?;
            Ok(ModelParams { w, sigma_sq: s2 })
        }
        OlsBaseline::WithIntercept => {
            let (n, k) = (data.len(), data.dim());
            let design = DenseMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { data.x()[(i, j - 1)] });
            let b = ols_fit(&design, data.y())?;
            let s2 = residual_variance(&design, data.y(), &b)?;
            Ok(ModelParams { w: b[1..].to_vec(), sigma_sq: s2 })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Row {
    pub n: usize,
    /// Median of `‖ŵ - w*‖₂ + |σ̂² - σ*²|` over the successful seeds.
    pub median_total_error: f64,
    pub errors: Vec<f64>,
    pub failures: usize,
}

/// Generates one pool of `max(n_grid)` observations, then for every `n` and
/// seed fits PSGD on a random size-`n` subsample.
pub fn experiment_fig2(n_grid: &[usize], base: &GenConfig, fit_cfg: &FitConfig, seeds: &[u64]) -> Result<Vec<Fig2Row>> {
    if n_grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("experiment grids must be non-empty".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("n grid must be strictly ascending".into()));
    }
    let pool_size = *n_grid.last().expect("non-empty");
    let pool = generate(&GenConfig { n_observed: pool_size, ..base.clone() })?;

    let cells: Vec<(usize, u64)> = n_grid.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let errors: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let mut idx = sample_indices(&mut rng, pool_size, n).into_vec();
            idx.sort_unstable();
            let sub = pool.dataset.select(&idx);
            fit(&sub, &base.set, &FitConfig { seed, ..fit_cfg.clone() })
                .ok()
                .map(|r| param_distance(&r.params, &pool.truth))
        })
        .collect();

    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let cell = &errors[gi * seeds.len()..(gi + 1) * seeds.len()];
            let errs: Vec<f64> = cell.iter().flatten().copied().collect();
            Fig2Row {
                n,
                median_total_error: median(&errs),
                failures: cell.len() - errs.len(),
                errors: errs,
            }
        })
        .collect())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `ln(median error)` against `ln(n)`.
pub fn log_log_slope(rows: &[Fig2Row]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_total_error > 0.0 && r.median_total_error.is_finite())
        .map(|r| ((r.n as f64).ln(), r.median_total_error.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Number of adjacent cells where the median error went up.
pub fn inversions(rows: &[Fig2Row]) -> usize {
    rows.windows(2)
        .filter(|w| w[1].median_total_error > w[0].median_total_error)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendCheck {
    pub slope: f64,
    pub inversions: usize,
    pub passed: bool,
}

/// Median errors non-increasing up to one adjacent inversion and a log-log
/// slope in `[-0.8, -0.2]`.
pub fn check_rate_trend(rows: &[Fig2Row]) -> TrendCheck {
    let slope = log_log_slope(rows);
    let inv = inversions(rows);
    TrendCheck { slope, inversions: inv, passed: inv <= 1 && (-0.8..=-0.2).contains(&slope) }
}
