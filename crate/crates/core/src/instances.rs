//! Random problem instances shared by the verification command and tests.

use rand::seq::SliceRandom;
use rand::Rng;

use std::f64::consts::PI;

use crate::constrained::{orientation_dim, RigidBodySet, RigidGroup, RigidPose};
use crate::error::Result;
use crate::geometry::{build_graph, build_triangulation, Configuration, RangingGraph, Region};

fn random_point<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random positions and random ranging pairs (each with at least one tag),
/// rigid or not. `density` is the probability of including each candidate pair.
pub fn random_framework<R: Rng + ?Sized>(
    dim: usize,
    tags: usize,
    anchors: usize,
    density: f64,
    rng: &mut R,
) -> Result<(RangingGraph, Configuration)> {
    let n = tags + anchors;
    let points: Vec<Vec<f64>> = (0..n).map(|_| random_point(dim, 0.0, 1.0, rng)).collect();
    let mut pairs = Vec::new();
    for i in 0..tags {
        for j in i + 1..n {
            if rng.random_bool(density) {
                pairs.push((i, j));
            }
        }
    }
    let graph = build_graph(dim, tags, anchors, &pairs)?;
    Ok((graph, Configuration::from_points(dim, &points)?))
}

/// Triangulation network on `tags` tags, optionally with extra tag-tag
/// links joining consecutive tags so that the tag subgraph is connected.
pub fn random_rigid_network<R: Rng + ?Sized>(
    dim: usize,
    anchors: usize,
    tags: usize,
    connect_tags: bool,
    rng: &mut R,
) -> Result<(RangingGraph, Configuration)> {
    let region = Region::new(vec![0.0; dim], vec![10.0; dim]);
    let anchor_points: Vec<Vec<f64>> = loop {
        let pts: Vec<Vec<f64>> = (0..anchors).map(|_| random_point(dim, 0.0, 10.0, rng)).collect();
        let refs: Vec<&[f64]> = pts.iter().take(dim + 1).map(|p| p.as_slice()).collect();
        let measure = crate::geometry::simplex_measure(&refs);
        if measure > if dim == 2 { 5.0 } else { 20.0 } {
            break pts;
        }
    };
    let (graph, config) = build_triangulation(dim, &anchor_points, tags, &region, rng)?;
    if !connect_tags {
        return Ok((graph, config));
    }
    let mut pairs: Vec<(usize, usize)> = graph.ranging_pairs().to_vec();
    let mut order: Vec<usize> = (0..tags).collect();
    order.shuffle(rng);
    for w in order.windows(2) {
        let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
        if !pairs.contains(&(a, b)) {
            pairs.push((a, b));
        }
    }
    let graph = build_graph(dim, tags, anchors, &pairs)?;
    Ok((graph, config))
}

/// Two robots carrying `per_robot` tags each plus one single tag, ranging to
/// `dim + 2` anchors around a 10 m box; robot poses and body offsets are
/// random, and the configuration satisfies the rigid-body constraints.
pub fn random_rigid_body_network<R: Rng + ?Sized>(
    dim: usize,
    per_robot: usize,
    rng: &mut R,
) -> Result<(RangingGraph, Configuration, RigidBodySet)> {
    let q = orientation_dim(dim)?;
    let u = 2 * per_robot + 1;
    let k = dim + 2;
    let offsets = |rng: &mut R| -> Vec<Vec<f64>> {
        loop {
            let offs: Vec<Vec<f64>> = (0..per_robot).map(|_| random_point(dim, -1.0, 1.0, rng)).collect();
            let separated = (0..per_robot).all(|a| {
                (a + 1..per_robot)
                    .all(|b| offs[a].iter().zip(&offs[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>() > 0.25)
            });
            // 3D bodies need offsets spanning a plane.
            let spread = dim == 2 || {
                let d1: Vec<f64> = offs[1].iter().zip(&offs[0]).map(|(x, y)| x - y).collect();
                let d2: Vec<f64> = offs[2].iter().zip(&offs[0]).map(|(x, y)| x - y).collect();
                let c = [d1[1] * d2[2] - d1[2] * d2[1], d1[2] * d2[0] - d1[0] * d2[2], d1[0] * d2[1] - d1[1] * d2[0]];
                c.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.2
            };
            if separated && spread {
                break offs;
            }
        }
    };
    let groups = (0..2)
        .map(|r| {
            let theta = (0..q).map(|_| rng.random_range(-PI..PI)).collect();
            RigidGroup::new(r, (r * per_robot..(r + 1) * per_robot).collect(), offsets(rng), theta)
        })
        .collect();
    let mut set = RigidBodySet::new(dim, u, groups)?;
    let mut pts: Vec<Vec<f64>> = vec![vec![0.0; dim]; u];
    pts[u - 1] = random_point(dim, 2.0, 8.0, rng);
    for a in 0..k {
        let mut p = random_point(dim, -1.0, 1.0, rng);
        for (c, v) in p.iter_mut().enumerate() {
            // Anchors near distinct corners of the box.
            *v += if (a >> c) & 1 == 1 { 10.0 } else { 0.0 };
        }
        if a == k - 1 {
            p = random_point(dim, 4.0, 6.0, rng);
        }
        pts.push(p);
    }
    let mut config = Configuration::from_points(dim, &pts)?;
    let poses: Vec<RigidPose> =
        set.groups.iter().map(|g| RigidPose::new(random_point(dim, 2.0, 8.0, rng), g.theta.clone())).collect();
    set.write_poses(&mut config, &poses)?;
    let mut pairs: Vec<(usize, usize)> = (0..u).flat_map(|t| (u..u + k).map(move |a| (t, a))).collect();
    pairs.push((0, per_robot));
    pairs.push((per_robot - 1, u - 1));
    let graph = build_graph(dim, u, k, &pairs)?;
    Ok((graph, config, set))
}
