use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{build_graph, Configuration, RangingGraph};
use crate::error::{Error, Result};

pub const MAX_ATTEMPTS_PER_TAG: usize = 1000;
pub const MIN_TRIANGLE_AREA: f64 = 1e-6;
pub const MIN_TETRA_VOLUME: f64 = 1e-9;

/// Axis-aligned sampling region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Area (2D) or volume (3D) of the simplex spanned by `dim + 1` points.
pub fn simplex_measure(points: &[&[f64]]) -> f64 {
    let dim = points.len() - 1;
    let mut m = DMatrix::zeros(dim, dim);
    for (k, p) in points[1..].iter().enumerate() {
        for c in 0..dim {
            m[(c, k)] = p[c] - points[0][c];
        }
    }
    let fact = if dim == 2 { 2.0 } else { 6.0 };
    m.determinant().abs() / fact
}

fn general_position(dim: usize, points: &[&[f64]]) -> bool {
    let threshold = if dim == 2 { MIN_TRIANGLE_AREA } else { MIN_TETRA_VOLUME };
    simplex_measure(points) > threshold
}

fn anchors_in_general_position(dim: usize, anchors: &[Vec<f64>]) -> bool {
    let k = anchors.len();
    if k < dim + 1 {
        return false;
    }
    let mut idx: Vec<usize> = (0..=dim).collect();
    loop {
        let pts: Vec<&[f64]> = idx.iter().map(|&i| anchors[i].as_slice()).collect();
        if general_position(dim, &pts) {
            return true;
        }
        // next combination
        let mut pos = dim as isize;
        while pos >= 0 && idx[pos as usize] == k - 1 - (dim - pos as usize) {
            pos -= 1;
        }
        if pos < 0 {
            return false;
        }
        let p = pos as usize;
        idx[p] += 1;
        for q in p + 1..=dim {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Places tags one at a time, each ranging to `dim + 1` earlier nodes in
/// general position. Returned indices put tags (in placement order) before
/// anchors.
pub fn build_triangulation<R: Rng + ?Sized>(
    dim: usize,
    anchor_positions: &[Vec<f64>],
    tag_count: usize,
    region: &Region,
    rng: &mut R,
) -> Result<(RangingGraph, Configuration)> {
    if dim != 2 && dim != 3 {
        return Err(Error::Dimension(format!("dim must be 2 or 3, got {dim}")));
    }
    if region.lower.len() != dim || region.upper.len() != dim {
        return Err(Error::Dimension("region dimension mismatch".into()));
    }
    if anchor_positions.iter().any(|a| a.len() != dim) {
        return Err(Error::Dimension("anchor dimension mismatch".into()));
    }
    if !anchors_in_general_position(dim, anchor_positions) {
        return Err(Error::Degenerate(format!("need {} anchors in general position", dim + 1)));
    }
    let k = anchor_positions.len();
    let diag: f64 = region.lower.iter().zip(&region.upper).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let min_sep = 1e-3 * diag.max(1e-9);

    // placed[i] holds positions in placement order: anchors first here,
    // remapped to tags-first at the end.
    let mut placed: Vec<Vec<f64>> = anchor_positions.to_vec();
    let mut links: Vec<Vec<usize>> = Vec::with_capacity(tag_count);
    for t in 0..tag_count {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS_PER_TAG {
            let candidate = region.sample(rng);
            let dist =
                |p: &Vec<f64>| -> f64 { p.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() };
            if placed.iter().any(|p| dist(p) < min_sep) {
                continue;
            }
            let mut order: Vec<usize> = (0..placed.len()).collect();
            order.sort_by(|&a, &b| dist(&placed[a]).total_cmp(&dist(&placed[b])));
            let nearest: Vec<usize> = order[..=dim].to_vec();
            let mut choice = None;
            let pts: Vec<&[f64]> = nearest.iter().map(|&i| placed[i].as_slice()).collect();
            if general_position(dim, &pts) {
                choice = Some(nearest);
            } else {
                for _ in 0..10 {
                    let subset: Vec<usize> = sample(rng, placed.len(), dim + 1).into_vec();
                    let pts: Vec<&[f64]> = subset.iter().map(|&i| placed[i].as_slice()).collect();
                    if general_position(dim, &pts) {
                        choice = Some(subset);
                        break;
                    }
                }
            }
            if let Some(c) = choice {
                found = Some((candidate, c));
                break;
            }
        }
        let Some((pos, nb)) = found else {
            return Err(Error::Degenerate(format!("could not place tag {t} after {MAX_ATTEMPTS_PER_TAG} attempts")));
        };
        placed.push(pos);
        links.push(nb);
    }

    // placement index -> node index
    let remap = |p: usize| if p < k { tag_count + p } else { p - k };
    let mut pairs = Vec::new();
    for (t, nb) in links.iter().enumerate() {
        for &p in nb {
            pairs.push((t, remap(p)));
        }
    }
    let graph = build_graph(dim, tag_count, k, &pairs)?;
    let mut points = placed[k..].to_vec();
    points.extend_from_slice(anchor_positions);
    let config = Configuration::from_points(dim, &points)?;
    Ok((graph, config))
}
