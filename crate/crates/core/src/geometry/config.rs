use nalgebra::{DVector, DVectorView};

use crate::error::{Error, Result};

/// Stacked node positions p = col(p_1, ..., p_N).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    coords: DVector<f64>,
}

impl Configuration {
    pub fn new(dim: usize, coords: DVector<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Dimension(format!("dim must be 2 or 3, got {dim}")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!("coordinate count {} not a multiple of {dim}", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Dimension("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Dimension(format!("point {i} has {} coordinates", p.len())));
            }
            flat.extend_from_slice(p);
        }
        Self::new(dim, DVector::from_vec(flat))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coords
    }

    pub fn point(&self, i: usize) -> DVectorView<'_, f64> {
        self.coords.rows(self.dim * i, self.dim)
    }

    pub fn point_vec(&self, i: usize) -> DVector<f64> {
        self.point(i).into_owned()
    }

    pub fn set_point(&mut self, i: usize, p: &[f64]) {
        let n = self.dim;
        self.coords.rows_mut(n * i, n).copy_from_slice(&p[..n]);
    }

    /// p_ij = p_i - p_j.
    pub fn diff(&self, i: usize, j: usize) -> DVector<f64> {
        self.point(i) - self.point(j)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.diff(i, j).norm()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).iter().copied().collect()).collect()
    }

    /// Coordinates of the first `count` nodes (the tag block when tags come first).
    pub fn head(&self, count: usize) -> DVector<f64> {
        self.coords.rows(0, self.dim * count).into_owned()
    }

    pub fn set_head(&mut self, values: &DVector<f64>) {
        let n = values.len();
        self.coords.rows_mut(0, n).copy_from(values);
    }
}
