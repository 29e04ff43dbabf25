//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Symmetric eigendecomposition with eigenvalues in ascending order.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix with eigenvalue cutoff
/// `rel_tol * max|lambda|`.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen_sorted(m);
    let smax = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, n);
    if smax == 0.0 {
        return out;
    }
    for k in 0..n {
        if vals[k].abs() > rel_tol * smax {
            let v = vecs.column(k);
            out += (v * v.transpose()) / vals[k];
        }
    }
    out
}

/// Inverse of a symmetric PSD matrix when its smallest eigenvalue exceeds
/// `rel_tol * lambda_max`, pseudo-inverse otherwise. The flag is true when the
/// pseudo-inverse branch was taken.
pub fn inverse_or_pinv(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, bool) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let (vals, _) = sym_eigen_sorted(m);
    let lmax = vals[n - 1].abs().max(vals[0].abs());
    if lmax > 0.0 && vals[0] > rel_tol * lmax {
        if let Some(chol) = symmetrize(m).cholesky() {
            return (chol.inverse(), false);
        }
    }
    (pinv_sym(m, rel_tol), true)
}

/// ln det of a symmetric positive definite matrix, `None` if Cholesky fails.
pub fn logdet_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = symmetrize(m).cholesky()?;
    let l = chol.l_dirty();
    Some((0..m.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Frobenius inner product tr(A^T B).
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(a.norm());
    if denom == 0.0 {
        0.0
    } else {
        (a - b).norm() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let (v, vecs) = sym_eigen_sorted(&m);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_projector_is_itself() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (p, flag) = inverse_or_pinv(&m, 1e-10);
        assert!(flag);
        assert!((p - m).norm() < 1e-14);
    }

    #[test]
    fn logdet_matches_product() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((logdet_spd(&m).unwrap() - 3f64.ln()).abs() < 1e-14);
    }
}
