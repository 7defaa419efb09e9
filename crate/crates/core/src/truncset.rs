//! The observation set `S`, survival probabilities and truncated-normal
//! moments and draws.
//!
//! Text grammar for interval unions: intervals joined by `U`, endpoints are
//! decimal literals, `-inf` or `inf`. Brackets are cosmetic; every finite
//! endpoint is closed. Examples: `[0,inf)`, `(-inf,-1]U[1,inf)`, `[-2,2]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::special::{log_sum_exp, std_interval};

/// Per-interval masses below this are treated as zero; a total below it is
/// reported as [`Error::EmptyMass`].
pub const MASS_FLOOR: f64 = 1e-14;

/// Default rejection budget per truncated draw.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Default number of normal draws for Monte-Carlo survival estimates on
/// oracle-defined sets.
pub const DEFAULT_MC_BUDGET: usize = 10_000;

pub type MembershipFn = dyn Fn(f64) -> bool + Send + Sync;

/// Closed interval `[lo, hi]`; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// The survival set `S`.
#[derive(Clone)]
pub enum TruncationSet {
    /// Sorted, pairwise disjoint, non-empty intervals.
    IntervalUnion(Vec<Interval>),
    /// Black-box membership predicate. Must be deterministic.
    Oracle(Arc<MembershipFn>),
}

impl TruncationSet {
    /// Validates and sorts a list of intervals.
    pub fn intervals(mut list: Vec<Interval>) -> Result<Self> {
        if list.is_empty() {
            return Err(Error::InvalidSet("no intervals given".into()));
        }
        for iv in &list {
            if iv.lo.is_nan() || iv.hi.is_nan() || !(iv.lo < iv.hi) {
                return Err(Error::InvalidSet(format!(
                    "interval [{}, {}] is empty",
                    iv.lo, iv.hi
                )));
            }
        }
        list.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for pair in list.windows(2) {
            if !(pair[0].hi < pair[1].lo) {
                return Err(Error::InvalidSet(format!(
                    "intervals [{}, {}] and [{}, {}] overlap or touch",
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                )));
            }
        }
        Ok(TruncationSet::IntervalUnion(list))
    }

    /// The whole real line.
    pub fn real_line() -> Self {
        TruncationSet::IntervalUnion(vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)])
    }

    /// `[threshold, ∞)`.
    pub fn left_truncated(threshold: f64) -> Self {
        TruncationSet::IntervalUnion(vec![Interval::new(threshold, f64::INFINITY)])
    }

    /// `(-∞, threshold]`.
    pub fn right_truncated(threshold: f64) -> Self {
        TruncationSet::IntervalUnion(vec![Interval::new(f64::NEG_INFINITY, threshold)])
    }

    pub fn oracle(f: impl Fn(f64) -> bool + Send + Sync + 'static) -> Self {
        TruncationSet::Oracle(Arc::new(f))
    }

    pub fn as_intervals(&self) -> Option<&[Interval]> {
        match self {
            TruncationSet::IntervalUnion(v) => Some(v),
            TruncationSet::Oracle(_) => None,
        }
    }

    pub(crate) fn require_intervals(&self, what: &'static str) -> Result<&[Interval]> {
        self.as_intervals().ok_or(Error::OracleUnsupported(what))
    }

    pub fn contains(&self, y: f64) -> bool {
        match self {
            TruncationSet::IntervalUnion(v) => v.iter().any(|iv| iv.contains(y)),
            TruncationSet::Oracle(f) => f(y),
        }
    }

    /// Probability that `N(mean, sigma²)` lands in the set.
    ///
    /// Exact for interval unions (`rng` and `mc_budget` unused); a Monte-Carlo
    /// fraction with its standard error for oracle sets.
    pub fn survival_probability<R: Rng + ?Sized>(
        &self,
        mean: f64,
        sigma: f64,
        mc_budget: usize,
        rng: &mut R,
    ) -> Result<Survival> {
        check_sigma(sigma)?;
        match self {
            TruncationSet::IntervalUnion(_) => Ok(Survival {
                probability: self.interval_survival(mean, sigma)?,
                std_error: 0.0,
            }),
            TruncationSet::Oracle(f) => {
                if mc_budget == 0 {
                    return Err(Error::ZeroBudget);
                }
                let hits = (0..mc_budget)
                    .filter(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        f(mean + sigma * e)
                    })
                    .count();
                let p = hits as f64 / mc_budget as f64;
                Ok(Survival {
                    probability: p,
                    std_error: (p * (1.0 - p) / mc_budget as f64).sqrt(),
                })
            }
        }
    }

    /// Exact `Σⱼ Φ((hiⱼ-mean)/σ) - Φ((loⱼ-mean)/σ)` for interval unions.
    pub fn interval_survival(&self, mean: f64, sigma: f64) -> Result<f64> {
        Ok(self.log_interval_survival(mean, sigma)?.exp())
    }

    /// Natural log of [`Self::interval_survival`], finite even when the
    /// probability underflows.
    pub fn log_interval_survival(&self, mean: f64, sigma: f64) -> Result<f64> {
        check_sigma(sigma)?;
        let ivs = self.require_intervals("exact survival probability")?;
        let logs: Vec<f64> = ivs
            .iter()
            .map(|iv| std_interval((iv.lo - mean) / sigma, (iv.hi - mean) / sigma).log_mass)
            .collect();
        Ok(log_sum_exp(&logs).min(0.0))
    }
}

impl fmt::Debug for TruncationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationSet::IntervalUnion(_) => write!(f, "TruncationSet({self})"),
            TruncationSet::Oracle(_) => write!(f, "TruncationSet(<oracle>)"),
        }
    }
}

impl fmt::Display for TruncationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationSet::IntervalUnion(v) => {
                for (i, iv) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "U")?;
                    }
                    let open = if iv.lo.is_finite() { '[' } else { '(' };
                    let close = if iv.hi.is_finite() { ']' } else { ')' };
                    write!(f, "{open}{},{}{close}", fmt_endpoint(iv.lo), fmt_endpoint(iv.hi))?;
                }
                Ok(())
            }
            TruncationSet::Oracle(_) => write!(f, "<oracle>"),
        }
    }
}

fn fmt_endpoint(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

impl FromStr for TruncationSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::InvalidSet("empty set description".into()));
        }
        let mut list = Vec::new();
        for piece in compact.split(['U', 'u']) {
            let inner = piece
                .trim_start_matches(['[', '('])
                .trim_end_matches([']', ')']);
            let (lo, hi) = inner
                .split_once(',')
                .ok_or_else(|| Error::InvalidSet(format!("expected 'lo,hi' in {piece:?}")))?;
            list.push(Interval::new(parse_endpoint(lo)?, parse_endpoint(hi)?));
        }
        TruncationSet::intervals(list)
    }
}

fn parse_endpoint(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => {
            let v: f64 = t
                .parse()
                .map_err(|_| Error::InvalidSet(format!("bad endpoint {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidSet(format!("bad endpoint {s:?}")))
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("sigma must be positive and finite, got {sigma}")))
    }
}

/// Survival probability with its Monte-Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survival {
    pub probability: f64,
    pub std_error: f64,
}

/// `N(mean, sigma², S)`: a normal restricted to the survival set.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal<'a> {
    pub mean: f64,
    pub sigma: f64,
    pub set: &'a TruncationSet,
}

/// Moments of a truncated normal, central moments about `mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mass: f64,
    pub mean: f64,
    pub var: f64,
    pub central3: f64,
    pub central4: f64,
}

impl TruncatedMoments {
    /// `E[z]`.
    pub fn m1(&self) -> f64 {
        self.mean
    }

    /// `E[z²]`.
    pub fn m2(&self) -> f64 {
        self.var + self.mean * self.mean
    }

    /// `Cov(z², z)`.
    pub fn cov_sq_z(&self) -> f64 {
        2.0 * self.mean * self.var + self.central3
    }

    /// `Var(z²)`.
    pub fn var_sq(&self) -> f64 {
        let c = self.mean;
        4.0 * c * c * self.var + 4.0 * c * self.central3 + self.central4 - self.var * self.var
    }
}

impl<'a> TruncatedNormal<'a> {
    pub fn new(mean: f64, sigma: f64, set: &'a TruncationSet) -> Result<Self> {
        check_sigma(sigma)?;
        if !mean.is_finite() {
            return Err(Error::InvalidConfig(format!("mean must be finite, got {mean}")));
        }
        Ok(Self { mean, sigma, set })
    }

    /// Closed-form moments up to order four for interval unions.
    pub fn moments(&self) -> Result<TruncatedMoments> {
        let ivs = self.set.require_intervals("closed-form truncated moments")?;
        let mut parts: Vec<(f64, StdCentral)> = Vec::with_capacity(ivs.len());
        let mut total = 0.0;
        for iv in ivs {
            let a = (iv.lo - self.mean) / self.sigma;
            let b = (iv.hi - self.mean) / self.sigma;
            let part = std_central_moments(a, b);
            if part.mass < MASS_FLOOR {
                continue;
            }
            total += part.mass;
            parts.push((part.mass, part));
        }
        if total < MASS_FLOOR {
            return Err(Error::EmptyMass { mass: total });
        }

        let mean_t: f64 = parts.iter().map(|(w, p)| w * p.mean).sum::<f64>() / total;
        let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
        for (w, p) in &parts {
            let w = w / total;
            let d = p.mean - mean_t;
            c2 += w * (p.c2 + d * d);
            c3 += w * (p.c3 + 3.0 * d * p.c2 + d * d * d);
            c4 += w * (p.c4 + 4.0 * d * p.c3 + 6.0 * d * d * p.c2 + d * d * d * d);
        }
        let s = self.sigma;
        let s2 = s * s;
        Ok(TruncatedMoments {
            mass: total,
            mean: self.mean + s * mean_t,
            var: s2 * c2,
            central3: s2 * s * c3,
            central4: s2 * s2 * c4,
        })
    }

    /// Exact draw by rejection: resample `mean + sigma·ε` until it lands in `S`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: usize) -> Result<f64> {
        self.sample_counted(rng, max_attempts).map(|(z, _)| z)
    }

    /// Like [`Self::sample`], also returning the number of normal draws used.
    pub fn sample_counted<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_attempts: usize,
    ) -> Result<(f64, usize)> {
        if max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be at least 1".into()));
        }
        for attempt in 1..=max_attempts {
            let e: f64 = rng.sample(StandardNormal);
            let z = self.mean + self.sigma * e;
            if self.set.contains(z) {
                return Ok((z, attempt));
            }
        }
        Err(Error::RejectionBudgetExceeded { max_attempts })
    }
}

// Standardized moments on one interval: mean and central moments 2..4.
#[derive(Debug, Clone, Copy)]
struct StdCentral {
    mass: f64,
    mean: f64,
    c2: f64,
    c3: f64,
    c4: f64,
}

// Integration by parts on d/dt[u^{p-1} φ(t)] with u = t - r gives
//   E[u^p] = (p-1) E[u^{p-2}] - r E[u^{p-1}] + [(a-r)^{p-1} φ(a) - (b-r)^{p-1} φ(b)] / P.
// Taking r = E[t] yields central moments without raw-moment cancellation.
fn std_central_moments(a: f64, b: f64) -> StdCentral {
    let iv = std_interval(a, b);
    let (pa, pb) = (iv.pdf_lo_ratio, iv.pdf_hi_ratio);
    let r = pa - pb;
    let boundary = |p: i32| {
        let lo = if pa == 0.0 { 0.0 } else { (a - r).powi(p - 1) * pa };
        let hi = if pb == 0.0 { 0.0 } else { (b - r).powi(p - 1) * pb };
        lo - hi
    };
    let e1 = 0.0;
    let e2 = 1.0 - r * e1 + boundary(2);
    let e3 = 2.0 * e1 - r * e2 + boundary(3);
    let e4 = 3.0 * e2 - r * e3 + boundary(4);
    StdCentral {
        mass: iv.mass,
        mean: r,
        c2: e2.max(0.0),
        c3: e3,
        c4: e4.max(0.0),
    }
}
