use super::{sym_eig, DenseMatrix};
use crate::error::{Error, Result};

/// Solves `M Σ + Σ M = G` for symmetric positive-definite `M` and symmetric `G`.
///
/// In the eigenbasis `M = V D Vᵀ` the equation decouples entrywise:
/// `Σ̃ᵢⱼ = G̃ᵢⱼ / (dᵢ + dⱼ)` with `G̃ = Vᵀ G V`.
pub fn solve_lyapunov(m: &DenseMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    if m.rows() != g.rows() || m.cols() != g.cols() {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{} but G is {}x{}",
            m.rows(),
            m.cols(),
            g.rows(),
            g.cols()
        )));
    }
    g.check_symmetric()?;
    let eig = sym_eig(m)?;
    let min = eig.min_value();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }

    let v = &eig.vectors;
    let gt = v.transpose().matmul(&g.symmetrized())?.matmul(v)?;
    let d = &eig.values;
    let st = DenseMatrix::from_fn(gt.rows(), gt.cols(), |i, j| gt[(i, j)] / (d[i] + d[j]));
    Ok(v.matmul(&st)?.matmul(&v.transpose())?.symmetrized())
}
