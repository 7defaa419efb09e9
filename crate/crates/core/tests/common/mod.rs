//! Test-side reference computations that share no code with the library:
//! Gauss–Legendre quadrature, dense Gauss–Jordan solves and a zooming grid
//! search for nearest points.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use truncreg::{Interval, TruncationSet};

const GL5_NODES: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite 5-point Gauss–Legendre on `[a, b]` with `pieces` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let mid = a + (i as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (t, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            total += w * half * f(mid + half * t);
        }
    }
    total
}

fn density(z: f64, mean: f64, sigma: f64) -> f64 {
    let u = (z - mean) / sigma;
    (-0.5 * u * u).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn clipped(set: &TruncationSet, mean: f64, sigma: f64) -> Vec<(f64, f64)> {
    let span = 40.0 * sigma;
    set.as_intervals()
        .expect("interval set")
        .iter()
        .filter_map(|iv: &Interval| {
            let lo = iv.lo.max(mean - span);
            let hi = iv.hi.min(mean + span);
            (lo < hi).then_some((lo, hi))
        })
        .collect()
}

/// `∫_S zᵖ φ((z - mean)/σ)/σ dz` for `p = 0..=4`, by quadrature.
pub fn raw_moments(mean: f64, sigma: f64, set: &TruncationSet) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (lo, hi) in clipped(set, mean, sigma) {
        for (p, slot) in out.iter_mut().enumerate() {
            *slot += integrate(|z| z.powi(p as i32) * density(z, mean, sigma), lo, hi, 4000);
        }
    }
    out
}

/// Survival probability of `N(mean, σ²)` on `S` by quadrature.
pub fn survival(mean: f64, sigma: f64, set: &TruncationSet) -> f64 {
    clipped(set, mean, sigma)
        .into_iter()
        .map(|(lo, hi)| integrate(|z| density(z, mean, sigma), lo, hi, 4000))
        .sum()
}

/// Per-sample negative log-likelihood in the `(w, σ²)` form:
/// `-log φ((y - wᵀx)/σ)/σ + log α`.
pub fn nll_w_sigma(w: &[f64], sigma_sq: f64, x: &[f64], y: f64, set: &TruncationSet) -> f64 {
    let mu: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    let sigma = sigma_sq.sqrt();
    let r = y - mu;
    0.5 * (2.0 * std::f64::consts::PI * sigma_sq).ln() + r * r / (2.0 * sigma_sq) + survival(mu, sigma, set).ln()
}

/// The same NLL written as a function of `θ = (v, λ)`.
pub fn nll_natural(theta: &[f64], x: &[f64], y: f64, set: &TruncationSet) -> f64 {
    let k = theta.len() - 1;
    let lambda = theta[k];
    let w: Vec<f64> = theta[..k].iter().map(|v| v / lambda).collect();
    nll_w_sigma(&w, 1.0 / lambda, x, y, set)
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Solves `A x = b` by Gauss–Jordan elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for j in col..=n {
            m[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in col..=n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n]).collect()
}

pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve(a, &e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn quad_form(m: &[Vec<f64>], d: &[f64]) -> f64 {
    m.iter().zip(d).map(|(row, di)| di * row.iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).sum()
}

/// Nearest point of `{(r, λ) : λmin ≤ λ ≤ λmax, 0 ≤ r ≤ √β λ}` to `(r0, λ0)`
/// with `r0 ≥ 0`. For fixed `λ` the best `r` is `min(r0, √β λ)`, leaving the
/// convex function `max(0, r0 - √β λ)² + (λ - λ0)²` of `λ`, which is scanned
/// on a grid and then narrowed by ternary search.
pub fn nearest_in_cone_slab(r0: f64, l0: f64, lmin: f64, lmax: f64, beta: f64) -> (f64, f64) {
    let sb = beta.sqrt();
    let f = |l: f64| (r0 - sb * l).max(0.0).powi(2) + (l - l0).powi(2);
    let grid = 2000;
    let at = |i: usize| lmin + (lmax - lmin) * i as f64 / grid as f64;
    let best = (0..=grid).min_by(|&i, &j| f(at(i)).total_cmp(&f(at(j)))).unwrap();
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let l = 0.5 * (lo + hi);
    (r0.min(sb * l), l)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A feature vector in the unit ball.
pub fn unit_ball(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g = normal_vec(rng, k);
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r: f64 = rng.random_range(0.2..1.0);
    g.iter().map(|x| x * r / n).collect()
}

/// A random interval-union set from a small family.
pub fn random_set(rng: &mut ChaCha8Rng) -> TruncationSet {
    let text = match rng.random_range(0..4) {
        0 => "[0,inf)",
        1 => "(-inf,-0.5]U[0.5,inf)",
        2 => "[-2,-0.3]U[0.2,2.5]",
        _ => "(-inf,0.4]",
    };
    text.parse().unwrap()
}

/// A natural-parameter point, sample and set with survival at least
/// `min_survival`, and `y` inside the set.
pub struct FeasiblePoint {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub y: f64,
    pub set: TruncationSet,
}

pub fn feasible_point(rng: &mut ChaCha8Rng, k: usize, min_survival: f64) -> FeasiblePoint {
    let set = random_set(rng);
    feasible_point_in(rng, k, min_survival, set)
}

/// [`feasible_point`] for a given set.
pub fn feasible_point_in(rng: &mut ChaCha8Rng, k: usize, min_survival: f64, set: TruncationSet) -> FeasiblePoint {
    loop {
        let lambda: f64 = rng.random_range(0.3..3.0);
        let dir = normal_vec(rng, k);
        let dn = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r: f64 = rng.random_range(0.0..2.0) * lambda;
        let mut theta: Vec<f64> = dir.iter().map(|d| d * r / dn).collect();
        theta.push(lambda);
        let x = unit_ball(rng, k);
        let mu = theta[..k].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / lambda;
        let sigma = 1.0 / lambda.sqrt();
        if survival(mu, sigma, &set) < min_survival {
            continue;
        }
        // A label drawn from the model itself, by rejection.
        let y = loop {
            let z = mu + sigma * rng.sample::<f64, _>(StandardNormal);
            if set.contains(z) {
                break z;
            }
        };
        return FeasiblePoint { theta, x, y, set };
    }
}
