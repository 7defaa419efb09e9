//! The feasible set `D = {(v, λ) : λ_min ≤ λ ≤ λ_max, ‖v‖² ≤ β·λ²}` and its
//! exact Euclidean projection.
//!
//! For a fixed `λ` the nearest `v` in the ball `‖v‖ ≤ √β·λ` is a radial
//! rescale of `v0`, so the projection reduces to the trapezoid
//! `{(r, λ) : λ_min ≤ λ ≤ λ_max, 0 ≤ r ≤ √β·λ}` in the plane of `r = ‖v‖`.
//! The seven cases below partition that plane by the normal cones of the
//! trapezoid's faces and corners.

#[cfg(debug_assertions)]
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Feasible set in natural parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionDomain {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub beta: f64,
}

/// Bounds for `λ = 1/σ²` relative to an initial variance estimate `σ0²`:
/// `λ ∈ [a²/(96σ0²), 8(5 - 2 ln a)/σ0²]`, where `a` lower-bounds the survival
/// probability and `β` bounds `‖w‖²`.
pub fn build_domain(sigma0_sq: f64, a: f64, beta: f64) -> Result<ProjectionDomain> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidSurvivalBound(a));
    }
    if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma0^2 must be positive, got {sigma0_sq}")));
    }
    ProjectionDomain::new(
        a * a / (96.0 * sigma0_sq),
        8.0 * (5.0 - 2.0 * a.ln()) / sigma0_sq,
        beta,
    )
}

impl ProjectionDomain {
    pub fn new(lambda_min: f64, lambda_max: f64, beta: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min < lambda_max && lambda_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { lambda_min, lambda_max, beta })
    }

    /// True iff `λ_min ≤ λ ≤ λ_max` and `‖v‖² ≤ β·λ²`.
    pub fn contains(&self, v: &[f64], lambda: f64) -> bool {
        let r2: f64 = v.iter().map(|x| x * x).sum();
        self.lambda_min <= lambda && lambda <= self.lambda_max && r2 <= self.beta * lambda * lambda
    }

    /// Nearest point of the domain to `(v0, λ0)`.
    pub fn project(&self, v0: &[f64], lambda0: f64) -> (Vec<f64>, f64) {
        let mut v = v0.to_vec();
        let mut lambda = lambda0;
        self.project_in_place(&mut v, &mut lambda);
        (v, lambda)
    }

    /// Projects in place; returns whether the point moved.
    pub fn project_in_place(&self, v: &mut [f64], lambda: &mut f64) -> bool {
        if self.contains(v, *lambda) {
            return false;
        }
        let r0 = norm2(v);
        let (mut scale, lam) = self.project_planar(r0, *lambda);
        let lam = lam.clamp(self.lambda_min, self.lambda_max);

        #[cfg(debug_assertions)]
        self.maybe_cross_check(r0, *lambda, scale * r0, lam);

        let orig = v.to_vec();
        // Rounding in the radial factor can leave the point an ulp outside the cone.
        for _ in 0..8 {
            for (x, o) in v.iter_mut().zip(&orig) {
                *x = o * scale;
            }
            if self.contains(v, lam) {
                break;
            }
            scale *= 1.0 - 4.0 * f64::EPSILON;
        }
        *lambda = lam;
        true
    }

    // Returns (factor applied to v0, projected λ).
    fn project_planar(&self, r0: f64, l0: f64) -> (f64, f64) {
        let (lo, hi, beta) = (self.lambda_min, self.lambda_max, self.beta);
        let s = beta.sqrt();
        let radial = |target: f64| if r0 > 0.0 { target / r0 } else { 0.0 };

        // 1. interior
        if lo <= l0 && l0 <= hi && r0 * r0 <= beta * l0 * l0 {
            return (1.0, l0);
        }
        // 2. above the top face
        if l0 >= hi && r0 <= s * hi {
            return (1.0, hi);
        }
        // 3. above the top face, outside the cone
        if l0 >= hi && r0 >= s * hi {
            return (radial(s * hi), hi);
        }
        // 4. below the bottom face
        if l0 <= lo && r0 <= s * lo {
            return (1.0, lo);
        }
        // 5. normal cone of the bottom corner
        if l0 <= lo && r0 >= s * lo && r0 <= s * lo + (lo - l0) / s {
            return (radial(s * lo), lo);
        }
        // 6. normal cone of the top corner
        if l0 <= hi && r0 >= s * hi + (hi - l0) / s {
            return (radial(s * hi), hi);
        }
        // 7. onto the cone surface r = √β·λ
        let lam = (s * r0 + l0) / (beta + 1.0);
        let factor = if r0 > 0.0 { (beta * r0 + s * l0) / ((beta + 1.0) * r0) } else { 0.0 };
        (factor, lam)
    }

    #[cfg(debug_assertions)]
    fn maybe_cross_check(&self, r0: f64, l0: f64, r: f64, lam: f64) {
        static CALLS: AtomicU64 = AtomicU64::new(0);
        if !CALLS.fetch_add(1, Ordering::Relaxed).is_multiple_of(10_000) || !(r0.is_finite() && l0.is_finite()) {
            return;
        }
        let (rb, lb) = self.nearest_planar_brute_force(r0, l0);
        let closed = (r - r0).hypot(lam - l0);
        let brute = (rb - r0).hypot(lb - l0);
        let scale = 1.0 + r0.abs() + l0.abs() + self.lambda_max;
        debug_assert!(
            closed <= brute + 1e-7 * scale,
            "projection of (r={r0}, lambda={l0}) onto {self:?}: closed form distance {closed}, brute force {brute}"
        );
    }

    /// Nearest point by direct numerical minimization, for cross-checking
    /// [`Self::project`]. Slow.
    pub fn project_brute_force(&self, v0: &[f64], lambda0: f64) -> (Vec<f64>, f64) {
        let r0 = norm2(v0);
        let (r, lam) = self.nearest_planar_brute_force(r0, lambda0);
        let factor = if r0 > 0.0 { r / r0 } else { 0.0 };
        (v0.iter().map(|x| x * factor).collect(), lam)
    }

    // Minimizes (λ - λ0)² + dist(r0, [0, √β·λ])² over λ by a grid then golden-section search.
    fn nearest_planar_brute_force(&self, r0: f64, l0: f64) -> (f64, f64) {
        let s = self.beta.sqrt();
        let cost = |l: f64| {
            let excess = (r0 - s * l).max(0.0);
            (l - l0).powi(2) + excess * excess
        };
        let (lo, hi) = (self.lambda_min, self.lambda_max);
        let n = 256;
        let step = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + i as f64 * step)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap_or(lo);
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if cost(c) <= cost(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let lam = [0.5 * (a + b), lo, hi]
            .into_iter()
            .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))
            .unwrap_or(lo);
        (r0.min(s * lam).max(0.0), lam)
    }
}

/// Free-function form of [`ProjectionDomain::contains`].
pub fn domain_contains(d: &ProjectionDomain, v: &[f64], lambda: f64) -> bool {
    d.contains(v, lambda)
}

/// Free-function form of [`ProjectionDomain::project`].
pub fn project(d: &ProjectionDomain, v0: &[f64], lambda0: f64) -> (Vec<f64>, f64) {
    d.project(v0, lambda0)
}
