//! Projected SGD on the truncated negative log-likelihood.
//!
//! The input is split into three contiguous parts: OLS weights come from the
//! first, the residual variance `σ0²` of those weights from the second, and
//! PSGD runs over the third, starting from the OLS point and projecting every
//! iterate back onto the domain built from `σ0²`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{
    empirical_hessian, grad_stochastic, grad_stochastic_counted, mean_grad_exact, GradientVector, ModelParams,
    NaturalParams,
};
use crate::linalg::{dist2, norm2, sym_eig, OlsEstimate};
use crate::projection::{build_domain, ProjectionDomain};
use crate::truncset::{TruncationSet, DEFAULT_MAX_ATTEMPTS};

/// Floor for an automatically resolved strong-convexity constant.
pub const MIN_AUTO_ZETA: f64 = 1e-6;

/// Initial variance estimates below this are rejected.
pub const MIN_SIGMA0_SQ: f64 = 1e-12;

/// Step-counter offset used by [`Schedule::strongly_convex_auto`]. Without
/// it the first steps `1/ζ, 1/(2ζ), …` can throw the iterate to corners of
/// the domain where the survival mass is too small to sample from.
pub const DEFAULT_OFFSET: f64 = 500.0;

/// How `ζ` is chosen for the `1/(ζt)` schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaChoice {
    /// Smallest eigenvalue of the empirical Hessian at the initial point,
    /// floored at [`MIN_AUTO_ZETA`].
    Auto,
    Fixed(f64),
}

/// Learning-rate schedule `η_t`, `t = 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `c/√t`.
    SqrtDecay { c: f64 },
    /// `1/(ζ(t + offset))`. With `offset = 0` this is the textbook `1/(ζt)`;
    /// a positive offset damps the first steps without changing the tail.
    StronglyConvex { zeta: ZetaChoice, offset: f64 },
    /// `lr0 · factor^⌊t/every⌋`.
    StepDecay { lr0: f64, factor: f64, every: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::SqrtDecay { c: 0.1 }
    }
}

impl Schedule {
    /// Default schedule for inference runs: automatic `ζ` with
    /// [`DEFAULT_OFFSET`].
    pub fn strongly_convex_auto() -> Self {
        Schedule::StronglyConvex { zeta: ZetaChoice::Auto, offset: DEFAULT_OFFSET }
    }

    /// Offset added to the step counter, zero except for `StronglyConvex`.
    pub fn offset(&self) -> f64 {
        match *self {
            Schedule::StronglyConvex { offset, .. } => offset,
            _ => 0.0,
        }
    }

    /// Step size at iteration `t ≥ 1`; `zeta` is only read by `StronglyConvex`.
    pub fn rate(&self, t: usize, zeta: f64) -> f64 {
        let t = t.max(1);
        match *self {
            Schedule::SqrtDecay { c } => c / (t as f64).sqrt(),
            Schedule::StronglyConvex { offset, .. } => 1.0 / (zeta * (t as f64 + offset)),
            Schedule::StepDecay { lr0, factor, every } => lr0 * factor.powi((t / every.max(1)) as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::SqrtDecay { c } => c > 0.0 && c.is_finite(),
            Schedule::StronglyConvex { zeta, offset } => {
                let zeta_ok = match zeta {
                    ZetaChoice::Fixed(z) => z > 0.0 && z.is_finite(),
                    ZetaChoice::Auto => true,
                };
                zeta_ok && offset >= 0.0 && offset.is_finite()
            }
            Schedule::StepDecay { lr0, factor, every } => {
                lr0 > 0.0 && lr0.is_finite() && factor > 0.0 && factor < 1.0 && every >= 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid schedule {self:?}")))
        }
    }
}

/// Stop once the mean exact gradient on a held-out tenth of the PSGD part
/// has norm at most `grad_norm_tol`, checked every `check_every` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    pub check_every: usize,
    pub grad_norm_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub schedule: Schedule,
    pub steps: usize,
    /// Rejection draws per stochastic gradient.
    pub batch: usize,
    pub max_attempts: usize,
    /// Assumed lower bound `a` on the survival probability.
    pub survival_bound_a: f64,
    /// Assumed bound `β` on `‖w‖²`.
    pub beta: f64,
    pub seed: u64,
    pub early_stop: Option<EarlyStop>,
    pub record_trajectory: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            steps: 2500,
            batch: 1,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            survival_bound_a: 0.1,
            beta: 100.0,
            seed: 0,
            early_stop: None,
            record_trajectory: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.steps == 0 || self.batch == 0 || self.max_attempts == 0 {
            return Err(Error::InvalidConfig("steps, batch and max_attempts must be at least 1".into()));
        }
        if !(self.survival_bound_a > 0.0 && self.survival_bound_a < 1.0) {
            return Err(Error::InvalidSurvivalBound(self.survival_bound_a));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some(es) = self.early_stop {
            if es.check_every == 0 || !(es.grad_norm_tol > 0.0) {
                return Err(Error::InvalidConfig(format!("invalid early stopping rule {es:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Norm of the mean exact gradient at the returned point, over the
    /// held-out part when early stopping is on, else over the PSGD samples.
    pub final_grad_norm: f64,
    pub projections_applied: usize,
    pub rejection_draws_total: usize,
    pub steps_run: usize,
    pub early_stopped: bool,
    /// Set by [`boost`] when no run agreed with enough of the others.
    pub no_majority: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub v: Vec<f64>,
    pub lambda: f64,
}

/// Starting point of PSGD and the domain it is confined to.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub ols: OlsEstimate,
    pub natural: NaturalParams,
    pub domain: ProjectionDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub natural: NaturalParams,
    pub init: Initialization,
    pub domain: ProjectionDomain,
    /// `ζ` used by the schedule, or the automatic value when the schedule
    /// does not use one. `None` when it cannot be computed (oracle sets).
    pub zeta_used: Option<f64>,
    pub diagnostics: Diagnostics,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    /// The samples PSGD iterated over.
    pub psgd_data: Dataset,
    pub schedule: Schedule,
}

impl FitResult {
    /// Steps run plus the schedule offset: the `n` for which a
    /// `1/(ζ(t + offset))` run behaves like a plain `1/(ζt)` run.
    pub fn effective_steps(&self) -> usize {
        self.diagnostics.steps_run + self.schedule.offset().round() as usize
    }
}

/// Contiguous parts of sizes `⌊N/3⌋, ⌊N/3⌋, N - 2⌊N/3⌋`.
pub fn split_three(data: &Dataset) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.len();
    if n < 3 {
        return Err(Error::TooFewSamples { have: n, need: 3 });
    }
    let third = n / 3;
    Ok((data.slice(0..third), data.slice(third..2 * third), data.slice(2 * third..n)))
}

/// OLS on `part1`, residual variance on `part2`, then the domain and the
/// nearest feasible point to `(w0/σ0², 1/σ0²)`.
pub fn initialize(part1: &Dataset, part2: &Dataset, cfg: &FitConfig) -> Result<Initialization> {
    let w0 = crate::linalg::ols_fit(part1.x(), part1.y())?;
    let sigma0_sq = crate::linalg::residual_variance(part2.x(), part2.y(), &w0)?;
    if !(sigma0_sq >= MIN_SIGMA0_SQ) {
        return Err(Error::DegenerateVariance(sigma0_sq));
    }
    let domain = build_domain(sigma0_sq, cfg.survival_bound_a, cfg.beta)?;
    let lambda0 = 1.0 / sigma0_sq;
    let mut v0: Vec<f64> = w0.iter().map(|w| w * lambda0).collect();
    let cap = cfg.beta.sqrt() * lambda0;
    let r = norm2(&v0);
    if r > cap {
        v0.iter_mut().for_each(|x| *x *= cap / r);
    }
    Ok(Initialization {
        ols: OlsEstimate { w0, sigma0_sq },
        natural: NaturalParams { v: v0, lambda: lambda0 },
        domain,
    })
}

/// Smallest Hessian eigenvalue at `p`, floored at [`MIN_AUTO_ZETA`].
pub fn auto_zeta(p: &NaturalParams, data: &Dataset, set: &TruncationSet) -> Result<f64> {
    let h = empirical_hessian(p, data, set)?;
    Ok(sym_eig(&h)?.min_value().max(MIN_AUTO_ZETA))
}

/// Runs the full estimator once. Deterministic given its inputs.
pub fn fit(data: &Dataset, set: &TruncationSet, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let (part1, part2, part3) = split_three(data)?;
    let init = initialize(&part1, &part2, cfg)?;

    let (train, holdout) = match cfg.early_stop {
        Some(_) => {
            set.require_intervals("early stopping on exact gradients")?;
            let m = part3.len();
            let h = m.div_ceil(10).min(m - 1);
            if h == 0 {
                return Err(Error::TooFewSamples { have: m, need: 2 });
            }
            (part3.slice(0..m - h), Some(part3.slice(m - h..m)))
        }
        None => (part3, None),
    };

    let zeta = match cfg.schedule {
        Schedule::StronglyConvex { zeta: ZetaChoice::Fixed(z), .. } => Some(z),
        Schedule::StronglyConvex { zeta: ZetaChoice::Auto, .. } => Some(auto_zeta(&init.natural, &train, set)?),
        _ if set.as_intervals().is_some() => auto_zeta(&init.natural, &train, set).ok(),
        _ => None,
    };
    let rate_zeta = zeta.unwrap_or(f64::NAN);

    let domain = init.domain;
    let mut v = init.natural.v.clone();
    let mut lambda = init.natural.lambda;
    let mut diag = Diagnostics::default();
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = train.len();
    let mut order: Vec<usize> = (0..m).collect();

    for t in 1..=cfg.steps {
        let pos = (t - 1) % m;
        if pos == 0 {
            order.shuffle(&mut rng);
        }
        let p = NaturalParams { v: v.clone(), lambda };
        let (g, draws) = match grad_stochastic_counted(&p, train.sample(order[pos]), set, &mut rng, cfg.batch, cfg.max_attempts) {
            Ok(out) => out,
            Err(e) => {
                diag.steps_run = t - 1;
                return Err(Error::FitAborted { step: t, diagnostics: Box::new(diag), source: Box::new(e) });
            }
        };
        diag.rejection_draws_total += draws;

        let eta = cfg.schedule.rate(t, rate_zeta);
        for (vi, gi) in v.iter_mut().zip(&g.dv) {
            *vi -= eta * gi;
        }
        lambda -= eta * g.dlambda;
        if domain.project_in_place(&mut v, &mut lambda) {
            diag.projections_applied += 1;
        }
        diag.steps_run = t;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(TrajectoryPoint { step: t, v: v.clone(), lambda });
        }

        if let (Some(es), Some(h)) = (cfg.early_stop, holdout.as_ref()) {
            if t % es.check_every == 0 {
                let p = NaturalParams { v: v.clone(), lambda };
                if let Ok(gh) = mean_grad_exact(&p, h, set) {
                    if gh.norm() <= es.grad_norm_tol {
                        diag.early_stopped = true;
                        break;
                    }
                }
            }
        }
    }

    let natural = NaturalParams { v, lambda };
    diag.final_grad_norm = final_grad_norm(&natural, holdout.as_ref().unwrap_or(&train), set, cfg);
    Ok(FitResult {
        params: natural.to_model(),
        natural,
        init,
        domain,
        zeta_used: zeta,
        diagnostics: diag,
        trajectory,
        psgd_data: train,
        schedule: cfg.schedule,
    })
}

fn final_grad_norm(p: &NaturalParams, data: &Dataset, set: &TruncationSet, cfg: &FitConfig) -> f64 {
    if set.as_intervals().is_some() {
        return mean_grad_exact(p, data, set).map(|g| g.norm()).unwrap_or(f64::NAN);
    }
    // Oracle sets: average one stochastic gradient per sample on a separate stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut acc = GradientVector::zeros(p.dim());
    for s in data.iter() {
        match grad_stochastic(p, s, set, &mut rng, cfg.batch, cfg.max_attempts) {
            Ok(g) => {
                acc.dv.iter_mut().zip(&g.dv).for_each(|(a, b)| *a += b);
                acc.dlambda += g.dlambda;
            }
            Err(_) => return f64::NAN,
        }
    }
    acc.norm() / data.len() as f64
}

/// `‖Δw‖₂ + |Δσ²|`.
pub fn param_distance(a: &ModelParams, b: &ModelParams) -> f64 {
    dist2(&a.w, &b.w) + (a.sigma_sq - b.sigma_sq).abs()
}

/// Repeats [`fit`] with seeds `seed+1, …, seed+runs`, each on its own random
/// reordering of the data, and returns the first result within `eps` of at
/// least half of the others.
pub fn boost(data: &Dataset, set: &TruncationSet, cfg: &FitConfig, runs: usize, eps: f64) -> Result<FitResult> {
    if runs == 0 {
        return Err(Error::InvalidConfig("boost needs at least one run".into()));
    }
    let configs: Vec<FitConfig> = (1..=runs as u64)
        .map(|r| FitConfig { seed: cfg.seed.wrapping_add(r), ..cfg.clone() })
        .collect();
    boost_with(data, set, &configs, eps)
}

/// [`boost`] over explicit per-run configurations. Each run reorders the data
/// with a permutation drawn from its own seed before splitting.
///
/// A failed run counts as far from every other. If no run has `eps`-close
/// company from at least `⌈(runs-1)/2⌉` others, the run with the smallest
/// median distance to the rest is returned with `no_majority` set.
pub fn boost_with(data: &Dataset, set: &TruncationSet, configs: &[FitConfig], eps: f64) -> Result<FitResult> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("boost needs at least one run".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig(format!("boost tolerance must be non-negative, got {eps}")));
    }
    let results: Vec<Result<FitResult>> = configs
        .par_iter()
        .map(|cfg| {
            let mut perm: Vec<usize> = (0..data.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(2);
            perm.shuffle(&mut rng);
            fit(&data.select(&perm), set, cfg)
        })
        .collect();

    let runs = results.len();
    let dist = |i: usize, j: usize| match (&results[i], &results[j]) {
        (Ok(a), Ok(b)) => param_distance(&a.params, &b.params),
        _ => f64::INFINITY,
    };
    let need = (runs - 1).div_ceil(2);
    for i in 0..runs {
        if results[i].is_ok() && (0..runs).filter(|&j| j != i && dist(i, j) <= eps).count() >= need {
            let mut out = results.into_iter().nth(i).expect("index in range")?;
            out.diagnostics.no_majority = false;
            return Ok(out);
        }
    }

    let median_dist = |i: usize| {
        let mut d: Vec<f64> = (0..runs).filter(|&j| j != i).map(|j| dist(i, j)).collect();
        d.sort_by(f64::total_cmp);
        d.get(d.len() / 2).copied().unwrap_or(0.0)
    };
    let best = (0..runs)
        .filter(|&i| results[i].is_ok())
        .min_by(|&a, &b| median_dist(a).total_cmp(&median_dist(b)));
    match best {
        Some(i) => {
            let mut out = results.into_iter().nth(i).expect("index in range")?;
            out.diagnostics.no_majority = true;
            Ok(out)
        }
        None => results.into_iter().next().expect("at least one run"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ols_fit, residual_variance, DenseMatrix};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn linear_data(n: usize, w: &[f64], sigma: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = w.len();
        let x = DenseMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| {
                let e: f64 = rng.sample(StandardNormal);
                x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + sigma * e
            })
            .collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn split_sizes() {
        let d = linear_data(10, &[1.0], 1.0, 0);
        let (a, b, c) = split_three(&d).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (3, 3, 4));
        assert_eq!(a.y()[0], d.y()[0]);
        assert_eq!(b.y()[0], d.y()[3]);
        assert_eq!(c.y()[3], d.y()[9]);
        let d9 = linear_data(9, &[1.0], 1.0, 0);
        let (a, b, c) = split_three(&d9).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (3, 3, 3));
        assert!(matches!(split_three(&d.slice(0..2)), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn schedules_are_non_increasing() {
        let schedules = [
            Schedule::SqrtDecay { c: 0.1 },
            Schedule::StronglyConvex { zeta: ZetaChoice::Fixed(0.3), offset: 0.0 },
            Schedule::StepDecay { lr0: 0.1, factor: 0.9, every: 100 },
        ];
        for s in schedules {
            let rates: Vec<f64> = (1..5000).map(|t| s.rate(t, 0.3)).collect();
            assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{s:?}");
        }
        let step = Schedule::StepDecay { lr0: 0.1, factor: 0.9, every: 100 };
        assert_eq!(step.rate(99, 0.0), 0.1);
        assert!((step.rate(250, 0.0) - 0.1 * 0.81).abs() < 1e-15);
    }

    #[test]
    fn initialization_examples() {
        let exact = Dataset::from_rows(&[[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]], vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
        let (p1, p2, _) = split_three(&exact).unwrap();
        assert!(matches!(
            initialize(&p1, &p2, &FitConfig::default()),
            Err(Error::DegenerateVariance(_))
        ));

        // w0 = 2 with unit residual variance; β = 1 ⇒ ‖w0‖² = 4β ⇒ v0 halves.
        let p1 = Dataset::from_rows(&[[1.0], [2.0]], vec![2.0, 4.0]).unwrap();
        let p2 = Dataset::from_rows(&[[1.0], [1.0]], vec![3.0, 1.0]).unwrap();
        let cfg = FitConfig { beta: 1.0, ..FitConfig::default() };
        let init = initialize(&p1, &p2, &cfg).unwrap();
        assert!((init.ols.sigma0_sq - 1.0).abs() < 1e-14);
        assert!((init.natural.v[0] - 1.0).abs() < 1e-12);
        assert_eq!(init.natural.lambda, 1.0);

        let wide = FitConfig { beta: 100.0, ..FitConfig::default() };
        let init = initialize(&p1, &p2, &wide).unwrap();
        assert!((init.natural.v[0] - 2.0).abs() < 1e-12);
        assert!(init.domain.contains(&init.natural.v, init.natural.lambda));
    }

    #[test]
    fn untruncated_fit_matches_ols_on_psgd_part() {
        let d = linear_data(3000, &[1.5, -0.5], 1.0, 21);
        let cfg = FitConfig { steps: 3000, record_trajectory: true, ..FitConfig::default() };
        let r = fit(&d, &TruncationSet::real_line(), &cfg).unwrap();
        let (_, _, p3) = split_three(&d).unwrap();
        let w = ols_fit(p3.x(), p3.y()).unwrap();
        let s2 = residual_variance(p3.x(), p3.y(), &w).unwrap();
        assert!(dist2(&r.params.w, &w) <= 0.1, "{:?} vs {:?}", r.params.w, w);
        assert!((r.params.sigma_sq - s2).abs() <= 0.2);
        let tr = r.trajectory.as_ref().unwrap();
        assert_eq!(tr.len(), 3000);
        assert!(tr.iter().all(|p| r.domain.contains(&p.v, p.lambda)));
        assert!(r.domain.contains(&r.natural.v, r.natural.lambda));
        assert_eq!(r.params, r.natural.to_model());
    }

    #[test]
    fn fit_is_deterministic() {
        let d = linear_data(300, &[0.7], 0.5, 2);
        let set = TruncationSet::left_truncated(0.0);
        let kept: Vec<usize> = (0..d.len()).filter(|&i| set.contains(d.y()[i])).collect();
        let d = d.select(&kept);
        let cfg = FitConfig { steps: 500, seed: 9, ..FitConfig::default() };
        let a = fit(&d, &set, &cfg).unwrap();
        let b = fit(&d, &set, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.diagnostics.rejection_draws_total >= 500);
    }

    #[test]
    fn early_stop_and_strong_convexity() {
        let d = linear_data(1500, &[1.0, 1.0], 1.0, 5);
        let cfg = FitConfig {
            schedule: Schedule::strongly_convex_auto(),
            steps: 400,
            early_stop: Some(EarlyStop { check_every: 50, grad_norm_tol: 10.0 }),
            ..FitConfig::default()
        };
        let r = fit(&d, &TruncationSet::real_line(), &cfg).unwrap();
        assert!(r.diagnostics.early_stopped);
        assert_eq!(r.diagnostics.steps_run, 50);
        assert!(r.zeta_used.unwrap() >= MIN_AUTO_ZETA);
        assert_eq!(r.psgd_data.len(), 450);
    }

    #[test]
    fn rejection_budget_aborts_with_diagnostics() {
        // Labels far in the tail of the initial model keep the sampler busy.
        let d = linear_data(60, &[1.0], 1.0, 8);
        let set: TruncationSet = "[30,31]".parse().unwrap();
        let cfg = FitConfig { max_attempts: 5, steps: 10, ..FitConfig::default() };
        match fit(&d, &set, &cfg) {
            Err(e @ Error::FitAborted { step: 1, .. }) => assert!(e.is_sampling_budget()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boost_selection() {
        let d = linear_data(900, &[1.0, -1.0], 1.0, 3);
        let full = TruncationSet::real_line();
        let cfg = FitConfig { steps: 900, ..FitConfig::default() };

        let single = boost(&d, &full, &cfg, 1, 1e-9).unwrap();
        assert!(!single.diagnostics.no_majority);

        let all = boost(&d, &full, &cfg, 3, 1e9).unwrap();
        let first = boost_with(&d, &full, &[FitConfig { seed: 1, ..cfg.clone() }], 0.0).unwrap();
        assert_eq!(all.params, first.params);

        // On truncated data a single step leaves the biased OLS start nearly
        // untouched, so that run sits far from the converged ones.
        let keep: Vec<usize> = (0..d.len()).filter(|&i| d.y()[i] >= 0.5).collect();
        let trunc = d.select(&keep);
        let set = TruncationSet::left_truncated(0.5);
        let cfg = FitConfig { steps: 3 * trunc.len(), schedule: Schedule::SqrtDecay { c: 0.05 }, ..cfg };
        let mut configs: Vec<FitConfig> = (1..=5).map(|s| FitConfig { seed: s, ..cfg.clone() }).collect();
        configs[0].steps = 1;
        let outlier = fit(&trunc.select(&permutation(trunc.len(), 1)), &set, &configs[0]).unwrap();
        let rest: Vec<FitResult> = (2..=5)
            .map(|s| fit(&trunc.select(&permutation(trunc.len(), s)), &set, &FitConfig { seed: s, ..cfg.clone() }).unwrap())
            .collect();
        let eps = 0.3;
        assert!(rest.iter().all(|r| param_distance(&r.params, &outlier.params) > eps));
        let chosen = boost_with(&trunc, &set, &configs, eps).unwrap();
        assert!(!chosen.diagnostics.no_majority);
        assert_ne!(chosen.params, outlier.params);
        assert_eq!(chosen.diagnostics.steps_run, cfg.steps);
    }

    fn permutation(n: usize, seed: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        perm.shuffle(&mut rng);
        perm
    }

    #[test]
    fn config_validation() {
        let d = linear_data(30, &[1.0], 1.0, 0);
        let full = TruncationSet::real_line();
        for bad in [
            FitConfig { steps: 0, ..FitConfig::default() },
            FitConfig { batch: 0, ..FitConfig::default() },
            FitConfig { schedule: Schedule::SqrtDecay { c: -1.0 }, ..FitConfig::default() },
            FitConfig { schedule: Schedule::StepDecay { lr0: 0.1, factor: 1.5, every: 10 }, ..FitConfig::default() },
            FitConfig { survival_bound_a: 1.0, ..FitConfig::default() },
        ] {
            assert!(fit(&d, &full, &bad).is_err(), "{bad:?}");
        }
        assert!(boost(&d, &full, &FitConfig::default(), 0, 0.1).is_err());
    }
}
