//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Largest absolute difference between `m` and its transpose.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

/// Lower Cholesky factor, or `None` when `m` is not numerically positive definite.
pub fn cholesky_lower(m: &Mat) -> Option<Mat> {
    m.clone().cholesky().map(|c| c.l())
}

pub fn spd_inverse(m: &Mat) -> Option<Mat> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// log det of a positive-definite matrix.
pub fn spd_logdet(m: &Mat) -> Option<f64> {
    let l = cholesky_lower(m)?;
    Some(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Clamp the eigenvalues of a symmetric matrix from below. Returns the
/// reconstructed matrix and whether any eigenvalue was raised.
pub fn clamp_eigenvalues(m: &Mat, floor: f64) -> (Mat, bool) {
    let eig = symmetrize(m).symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return (symmetrize(m), false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * Mat::from_diagonal(&clamped) * v.transpose();
    (symmetrize(&out), true)
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Gaussian log density given the lower Cholesky factor of the covariance.
pub fn gaussian_logpdf_chol(x: &Vector, mean: &Vector, chol_l: &Mat) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let z = chol_l
        .solve_lower_triangular(&diff)
        .expect("Cholesky factor has a non-zero diagonal");
    let logdet: f64 = chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (z.norm_squared() + logdet + d * (2.0 * std::f64::consts::PI).ln())
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn all_finite_mat(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn vstack(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub fn mat_from_rows(rows: &[Vec<f64>], ncols: usize) -> Option<Mat> {
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
