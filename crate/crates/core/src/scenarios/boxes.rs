use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle that an anchor must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Influence distance of each edge.
    pub d_s: f64,
}

impl BoundingBox {
    pub fn new(lower: [f64; 2], upper: [f64; 2], d_s: f64) -> Result<Self> {
        if !(lower[0] < upper[0] && lower[1] < upper[1]) || !(d_s > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid box {lower:?}..{upper:?} with d_s = {d_s}")));
        }
        Ok(Self { lower, upper, d_s })
    }

    pub fn edges(&self) -> [([f64; 2], [f64; 2]); 4] {
        let [x0, y0] = self.lower;
        let [x1, y1] = self.upper;
        [([x0, y0], [x1, y0]), ([x1, y0], [x1, y1]), ([x1, y1], [x0, y1]), ([x0, y1], [x0, y0])]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.lower[0] && p[0] < self.upper[0] && p[1] > self.lower[1] && p[1] < self.upper[1]
    }

    /// Clamps `p` into the box shrunk by `margin` on every side.
    pub fn clamp(&self, p: [f64; 2], margin: f64) -> [f64; 2] {
        let c = |v: f64, lo: f64, hi: f64| {
            let (lo, hi) = (lo + margin, hi - margin);
            if lo > hi {
                0.5 * (lo + hi)
            } else {
                v.clamp(lo, hi)
            }
        };
        [c(p[0], self.lower[0], self.upper[0]), c(p[1], self.lower[1], self.upper[1])]
    }
}

/// Nearest point of segment [a, b] to p.
fn nearest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

/// Sum over the box edges of g(d) = 0.5 (1/d - 1/d_s)^2 for d < d_s, and its gradient.
pub fn repulsive_box_gradient(p: [f64; 2], bbox: &BoundingBox) -> Result<(f64, [f64; 2])> {
    if !bbox.contains(p) {
        return Err(Error::OutsideBox { position: p });
    }
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for (a, b) in bbox.edges() {
        let q = nearest_on_segment(p, a, b);
        let diff = [p[0] - q[0], p[1] - q[1]];
        let d = diff[0].hypot(diff[1]);
        if d >= bbox.d_s {
            continue;
        }
        let k = 1.0 / d - 1.0 / bbox.d_s;
        value += 0.5 * k * k;
        let dg = -k / (d * d);
        grad[0] += dg * diff[0] / d;
        grad[1] += dg * diff[1] / d;
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoundingBox {
        BoundingBox::new([0.0, 0.0], [10.0, 4.0], 1.5).unwrap()
    }

    #[test]
    fn far_from_edges_is_flat() {
        let (v, g) = repulsive_box_gradient([5.0, 2.0], &unit()).unwrap();
        assert_eq!((v, g), (0.0, [0.0, 0.0]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = unit();
        for p in [[0.4, 2.0], [1.0, 0.7], [9.2, 3.5], [5.0, 0.2]] {
            let (_, g) = repulsive_box_gradient(p, &b).unwrap();
            let h = 1e-7;
            for c in 0..2 {
                let mut pp = p;
                pp[c] += h;
                let mut pm = p;
                pm[c] -= h;
                let fd =
                    (repulsive_box_gradient(pp, &b).unwrap().0 - repulsive_box_gradient(pm, &b).unwrap().0) / (2.0 * h);
                assert!((fd - g[c]).abs() < 1e-6 * g[c].abs().max(1.0), "{p:?} {c}: {fd} vs {}", g[c]);
            }
        }
    }

    #[test]
    fn grows_without_bound_near_an_edge() {
        let b = unit();
        let mut last = 0.0;
        for k in 1..12 {
            let y = 2.0f64.powi(-k);
            let (v, _) = repulsive_box_gradient([5.0, y], &b).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(last > 1e6);
    }

    #[test]
    fn outside_is_an_error() {
        assert!(matches!(repulsive_box_gradient([5.0, 0.0], &unit()), Err(Error::OutsideBox { .. })));
        assert!(repulsive_box_gradient([-1.0, 2.0], &unit()).is_err());
    }
}
