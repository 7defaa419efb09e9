use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// A Cholesky pivot is rejected when it falls below this fraction of the
/// corresponding diagonal entry of the Gram matrix.
const PIVOT_RTOL: f64 = 1e-9;

/// Jitter added to the Gram diagonal, as a fraction of `trace / k`, on the
/// single retry after a failed factorization.
const JITTER: f64 = 1e-10;

/// Ordinary least squares fit ignoring truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsEstimate {
    pub w0: Vec<f64>,
    /// Mean squared residual, `(1/m) Σ (yᵢ - w0ᵀxᵢ)²`.
    pub sigma0_sq: f64,
}

impl OlsEstimate {
    /// Fits weights and the mean squared residual on the same rows.
    pub fn fit(x: &DenseMatrix, y: &[f64]) -> Result<Self> {
        let w0 = ols_fit(x, y)?;
        let sigma0_sq = residual_variance(x, y, &w0)?;
        Ok(Self { w0, sigma0_sq })
    }
}

/// Solves the normal equations `(XᵀX) w = Xᵀy` through a Cholesky
/// factorization of the Gram matrix.
pub fn ols_fit(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} feature rows but {} labels",
            y.len()
        )));
    }
    if n < k || k == 0 {
        return Err(Error::TooFewSamples { have: n, need: k.max(1) });
    }

    let mut gram = DenseMatrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for i in 0..n {
        let row = x.row(i);
        for a in 0..k {
            rhs[a] += row[a] * y[i];
            for b in a..k {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let scale = gram.diag();
    if scale.iter().any(|&d| d <= 0.0) {
        return Err(Error::SingularDesign);
    }

    let chol = match cholesky(&gram, &scale) {
        Some(l) => l,
        None => {
            let jitter = JITTER * gram.trace() / k as f64;
            cholesky(&gram.shift_diag(jitter), &scale).ok_or(Error::SingularDesign)?
        }
    };
    Ok(cholesky_solve(&chol, &rhs))
}

/// Mean squared residual `(1/m) Σ (yᵢ - wᵀxᵢ)²`.
pub fn residual_variance(x: &DenseMatrix, y: &[f64], w: &[f64]) -> Result<f64> {
    if y.len() != x.rows() || w.len() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} design, {} labels, {} weights",
            x.rows(),
            x.cols(),
            y.len(),
            w.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::TooFewSamples { have: 0, need: 1 });
    }
    let ss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let r = yi - dot(x.row(i), w);
            r * r
        })
        .sum();
    Ok(ss / y.len() as f64)
}

// Lower-triangular factor, or None when a pivot is not safely positive.
fn cholesky(a: &DenseMatrix, scale: &[f64]) -> Option<DenseMatrix> {
    let k = a.rows();
    let mut l = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let mut pivot = a[(j, j)];
        for p in 0..j {
            pivot -= l[(j, p)] * l[(j, p)];
        }
        if !(pivot > PIVOT_RTOL * scale[j]) {
            return None;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..k {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let k = l.rows();
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * z[p];
        }
        z[i] = s / l[(i, i)];
    }
    let mut w = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = z[i];
        for p in (i + 1)..k {
            s -= l[(p, i)] * w[p];
        }
        w[i] = s / l[(i, i)];
    }
    w
}
