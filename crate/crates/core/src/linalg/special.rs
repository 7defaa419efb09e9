//! Standard-normal special functions with tail-stable forms.
//!
//! Interval masses and Mills-type ratios are evaluated through the scaled
//! complementary error function `erfcx(x) = exp(x²)·erfc(x)` so that
//! ratios such as `φ(a) / (Φ(b) - Φ(a))` stay finite far in the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};


/// `1 / sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `ln(sqrt(2π))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Standard normal quantile `Φ⁻¹(p)`.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // Newton polish against the CDF; the starting value is good to ~1e-10.
    for _ in 0..2 {
        let d = norm_pdf(x);
        if d > 0.0 && x.is_finite() {
            x -= (norm_cdf(x) - p) / d;
        }
    }
    x
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // erfcx(-x) = 2 exp(x²) - erfcx(x)
        let e = (x * x).exp();
        return 2.0 * e - erfcx(-x);
    }
    if x < 25.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    // Continued fraction, evaluated bottom-up:
    // erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut k = x;
    for n in (1..=60).rev() {
        k = x + (n as f64 * 0.5) / k;
    }
    1.0 / (PI.sqrt() * k)
}

/// Mass and boundary ratios of a standard normal restricted to `[a, b]`.
///
/// `pdf_lo_ratio = φ(a)/P` and `pdf_hi_ratio = φ(b)/P`, zero at infinite
/// endpoints. `log_mass` is accurate even where `mass` underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdInterval {
    pub mass: f64,
    pub log_mass: f64,
    pub pdf_lo_ratio: f64,
    pub pdf_hi_ratio: f64,
}

/// Evaluates [`StdInterval`] for standardized endpoints `a < b`.
pub fn std_interval(a: f64, b: f64) -> StdInterval {
    debug_assert!(a < b, "interval must be non-empty");
    if a >= 0.0 {
        upper_tail_interval(a, b)
    } else if b <= 0.0 {
        let m = upper_tail_interval(-b, -a);
        StdInterval {
            mass: m.mass,
            log_mass: m.log_mass,
            pdf_lo_ratio: m.pdf_hi_ratio,
            pdf_hi_ratio: m.pdf_lo_ratio,
        }
    } else {
        // Straddles zero: Φ(b) - Φ(a) = ½erf(b/√2) + ½erf(-a/√2), no cancellation.
        let half_b = if b.is_infinite() { 0.5 } else { 0.5 * libm::erf(b * FRAC_1_SQRT_2) };
        let half_a = if a.is_infinite() { 0.5 } else { 0.5 * libm::erf(-a * FRAC_1_SQRT_2) };
        let mass = half_a + half_b;
        let lo = if a.is_finite() { norm_pdf(a) / mass } else { 0.0 };
        let hi = if b.is_finite() { norm_pdf(b) / mass } else { 0.0 };
        StdInterval {
            mass,
            log_mass: mass.ln(),
            pdf_lo_ratio: lo,
            pdf_hi_ratio: hi,
        }
    }
}

// 0 <= a < b <= inf. Everything is expressed relative to the tail Q(a).
fn upper_tail_interval(a: f64, b: f64) -> StdInterval {
    let ex_a = erfcx(a * FRAC_1_SQRT_2);
    // φ(a)/Q(a) = √(2/π) / erfcx(a/√2)
    let inv_mills = (2.0 / PI).sqrt() / ex_a;
    // log Q(a) = -a²/2 + ln(erfcx(a/√2)/2)
    let log_qa = -0.5 * a * a + (0.5 * ex_a).ln();
    let (ratio, decay) = if b.is_infinite() {
        (0.0, 0.0)
    } else {
        // exp(-(b² - a²)/2) without forming b² - a² directly
        let decay = (-0.5 * (b - a) * (b + a)).exp();
        (decay * erfcx(b * FRAC_1_SQRT_2) / ex_a, decay)
    };
    let keep = 1.0 - ratio;
    let log_mass = log_qa + (-ratio).ln_1p();
    let lo = inv_mills / keep;
    StdInterval {
        mass: log_mass.exp(),
        log_mass,
        pdf_lo_ratio: lo,
        pdf_hi_ratio: lo * decay,
    }
}

/// `ln(Σ exp(xᵢ))`, returning `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
