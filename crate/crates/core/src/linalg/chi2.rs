use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::special::norm_quantile;

/// `1 - alpha` style quantile of the chi-square distribution with `df`
/// degrees of freedom: returns `q` with `P(χ²_df ≤ q) = p`.
///
/// Inverts the regularized lower incomplete gamma function by safeguarded
/// Newton steps inside a bisection bracket, starting from the
/// Wilson–Hilferty approximation.
///
/// Panics if `df == 0` or `p` is outside `(0, 1)`.
pub fn chi2_quantile(df: usize, p: f64) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1), got {p}");

    let k = df as f64;
    let shape = 0.5 * k;
    let cdf = |q: f64| if q <= 0.0 { 0.0 } else { gamma_lr(shape, 0.5 * q) };
    let ln_norm = shape * std::f64::consts::LN_2 + ln_gamma(shape);
    let pdf = |q: f64| ((shape - 1.0) * q.ln() - 0.5 * q - ln_norm).exp();

    // Wilson–Hilferty start
    let h = 2.0 / (9.0 * k);
    let z = norm_quantile(p);
    let mut q = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(q > 0.0) || !q.is_finite() {
        q = k.min(1.0) * p;
    }

    let mut lo = 0.0;
    let mut hi = q.max(k).max(1.0);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }

    for _ in 0..200 {
        let f = cdf(q) - p;
        if f == 0.0 {
            return q;
        }
        if f < 0.0 {
            lo = lo.max(q);
        } else {
            hi = hi.min(q);
        }
        let d = pdf(q);
        let mut next = if d > 0.0 && d.is_finite() { q - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - q).abs() <= 1e-14 * q.max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        q = next;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::special::norm_cdf;

    #[test]
    fn two_degrees_closed_form() {
        // χ²₂ CDF is 1 - exp(-q/2) ⇒ q = -2 ln(1 - p)
        for &p in &[0.01f64, 0.5, 0.9, 0.95, 0.999] {
            let expected = -2.0 * (1.0 - p).ln();
            assert!((chi2_quantile(2, p) - expected).abs() < 1e-9, "p = {p}");
        }
        assert!((chi2_quantile(2, 0.95) - 5.991_46).abs() < 1e-5);
    }

    #[test]
    fn one_degree_is_squared_normal() {
        // P(Z² ≤ q) = 2Φ(√q) - 1; check the 0.975 normal quantile squared.
        let q = chi2_quantile(1, 0.95);
        assert!((q - 3.841_46).abs() < 1e-5);
        assert!((2.0 * norm_cdf(q.sqrt()) - 1.0 - 0.95).abs() < 1e-10);
    }

    #[test]
    fn even_df_poisson_identity() {
        // For even df = 2m: P(χ² ≤ q) = 1 - e^{-q/2} Σ_{j<m} (q/2)^j / j!
        let cdf_even = |m: usize, q: f64| {
            let x = 0.5 * q;
            let mut term = 1.0;
            let mut s = 0.0;
            for j in 0..m {
                if j > 0 {
                    term *= x / j as f64;
                }
                s += term;
            }
            1.0 - (-x).exp() * s
        };
        for m in 1..=10 {
            for &p in &[0.05, 0.5, 0.9, 0.99] {
                let q = chi2_quantile(2 * m, p);
                assert!((cdf_even(m, q) - p).abs() < 1e-9, "df = {} p = {p}", 2 * m);
            }
        }
    }

    #[test]
    fn monotone_in_p_and_df() {
        let ps = [1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-9];
        for df in 1..=30 {
            let qs: Vec<f64> = ps.iter().map(|&p| chi2_quantile(df, p)).collect();
            assert!(qs.windows(2).all(|w| w[0] < w[1]), "df = {df}");
            for &p in &ps[1..ps.len() - 1] {
                assert!(chi2_quantile(df, p) < chi2_quantile(df + 1, p));
            }
        }
    }

    #[test]
    fn lower_tail_goes_to_zero() {
        for df in [1, 3, 8] {
            let q = chi2_quantile(df, 1e-12);
            assert!((0.0..1e-2).contains(&q), "df = {df}: {q}");
        }
    }
}
