use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How small a singular value must be to count as zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance {
    /// `max(rows, cols) · ε · s_ref`, where `s_ref` is the largest singular
    /// value of the reference matrix supplied by the caller.
    #[default]
    MachineScaled,
    Absolute(f64),
}

impl RankTolerance {
    pub fn threshold(&self, rows: usize, cols: usize, reference_sv: f64) -> f64 {
        match *self {
            RankTolerance::MachineScaled => {
                rows.max(cols) as f64 * f64::EPSILON * reference_sv
            }
            RankTolerance::Absolute(t) => t,
        }
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

/// Rank of `m`, thresholding against `reference_sv` (pass the largest
/// singular value of `m` itself for the usual definition).
pub fn rank_with_reference(m: &DMatrix<f64>, reference_sv: f64, tol: RankTolerance) -> usize {
    let thr = tol.threshold(m.nrows(), m.ncols(), reference_sv);
    singular_values(m).iter().filter(|&&s| s > thr).count()
}

pub fn rank(m: &DMatrix<f64>, tol: RankTolerance) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thr = tol.threshold(m.nrows(), m.ncols(), smax);
    sv.iter().filter(|&&s| s > thr).count()
}

/// `I - X(XᵀX)⁻¹Xᵀ`, formed from a thin QR factorisation of `X`.
pub fn residual_projector(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let q = x.clone().qr().q();
    DMatrix::identity(n, n) - &q * q.transpose()
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `X` (full column rank assumed): an `n × (n − p)` matrix `B` with
/// `BBᵀ = I − X(XᵀX)⁻¹Xᵀ` and `BᵀB = I`.
pub fn residual_basis(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = residual_projector(x).symmetric_eigen();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .collect();
    DMatrix::from_fn(x.nrows(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

/// `ln |A|` for symmetric positive definite `A` via Cholesky.
pub fn ln_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn horizontal_concat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot concatenate {}-row and {}-row matrices",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}
