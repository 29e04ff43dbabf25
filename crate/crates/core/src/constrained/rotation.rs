use nalgebra::{DMatrix, Matrix3, Rotation2, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Number of orientation parameters: 1 in 2D, 3 in 3D.
pub fn orientation_dim(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        3 => Ok(3),
        _ => Err(Error::Dimension(format!("dimension must be 2 or 3, got {dim}"))),
    }
}

/// exp([theta]x): planar rotation by theta[0], or Rodrigues' formula in 3D.
pub fn rotation_exp(theta: &[f64], dim: usize) -> Result<DMatrix<f64>> {
    let q = orientation_dim(dim)?;
    if theta.len() != q {
        return Err(Error::Dimension(format!("expected {q} orientation parameters, got {}", theta.len())));
    }
    Ok(if dim == 2 {
        let r = Rotation2::new(theta[0]);
        DMatrix::from_column_slice(2, 2, r.matrix().as_slice())
    } else {
        let r = Rotation3::from_scaled_axis(Vector3::new(theta[0], theta[1], theta[2]));
        DMatrix::from_column_slice(3, 3, r.matrix().as_slice())
    })
}

/// Inverse of [`rotation_exp`] on rotation matrices (angle in (-pi, pi]).
pub fn rotation_log(rot: &DMatrix<f64>) -> Result<Vec<f64>> {
    match rot.nrows() {
        2 => Ok(vec![rot[(1, 0)].atan2(rot[(0, 0)])]),
        3 => {
            let m = Matrix3::from_iterator(rot.iter().copied());
            let r = Rotation3::from_matrix_unchecked(m);
            Ok(r.scaled_axis().as_slice().to_vec())
        }
        d => Err(Error::Dimension(format!("dimension must be 2 or 3, got {d}"))),
    }
}
