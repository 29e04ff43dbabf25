use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a node; tags come first, anchors after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    TagTag,
    TagAnchor,
    AnchorAnchor,
}

/// Ranging graph over `tag_count` tags followed by `anchor_count` anchors.
/// Anchor-anchor edges are implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangingGraph {
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    ranging_pairs: usize,
}

pub fn build_graph(
    dim: usize,
    tag_count: usize,
    anchor_count: usize,
    ranging_pairs: &[(usize, usize)],
) -> Result<RangingGraph> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidGraph(format!("dim must be 2 or 3, got {dim}")));
    }
    let n = tag_count + anchor_count;
    if anchor_count < 2 || tag_count == 0 {
        return Err(Error::InvalidGraph(format!("need 1 < K < N, got K = {anchor_count}, N = {n}")));
    }
    let mut seen = BTreeSet::new();
    for &(a, b) in ranging_pairs {
        if a >= n || b >= n {
            return Err(Error::InvalidGraph(format!("pair ({a},{b}) out of range for N = {n}")));
        }
        if a == b {
            return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
        }
        if a >= tag_count && b >= tag_count {
            return Err(Error::InvalidGraph(format!("pair ({a},{b}) joins two anchors; anchor links are implicit")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidGraph(format!("duplicate pair ({a},{b})")));
        }
    }
    let mut edges: Vec<(usize, usize)> = seen.into_iter().collect();
    let p = edges.len();
    for a in tag_count..n {
        for b in a + 1..n {
            edges.push((a, b));
        }
    }
    let kind = |e: &(usize, usize)| edge_kind(tag_count, e.0, e.1);
    edges.sort_by(|x, y| kind(x).cmp(&kind(y)).then(x.cmp(y)));

    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in &edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    Ok(RangingGraph { dim, tag_count, anchor_count, edges, neighbors, ranging_pairs: p })
}

fn edge_kind(tag_count: usize, a: usize, b: usize) -> EdgeKind {
    match (a < tag_count, b < tag_count) {
        (true, true) => EdgeKind::TagTag,
        (false, false) => EdgeKind::AnchorAnchor,
        _ => EdgeKind::TagAnchor,
    }
}

impl RangingGraph {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag_count(&self) -> usize {
        self.tag_count
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_count
    }

    pub fn node_count(&self) -> usize {
        self.tag_count + self.anchor_count
    }

    /// All edges in canonical order, each as (min, max).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of measured ranging pairs P (edges with at least one tag).
    pub fn ranging_pair_count(&self) -> usize {
        self.ranging_pairs
    }

    /// The ranging pairs, which are the first P edges.
    pub fn ranging_pairs(&self) -> &[(usize, usize)] {
        &self.edges[..self.ranging_pairs]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_kind(&self, a: usize, b: usize) -> EdgeKind {
        edge_kind(self.tag_count, a, b)
    }

    pub fn is_tag(&self, i: usize) -> bool {
        i < self.tag_count
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        i >= self.tag_count && i < self.node_count()
    }

    /// Sorted neighborhood N_i.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn tag_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i].iter().copied().filter(move |&j| j < self.tag_count)
    }

    pub fn anchor_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i].iter().copied().filter(move |&j| j >= self.tag_count)
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        a < self.node_count() && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Connected components of the tag-induced subgraph, each sorted, ordered
    /// by smallest member.
    pub fn tag_components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.tag_count];
        let mut out = Vec::new();
        for start in 0..self.tag_count {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut k = 0;
            while k < members.len() {
                let i = members[k];
                for j in self.tag_neighbors(i) {
                    if comp[j] == usize::MAX {
                        comp[j] = id;
                        members.push(j);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Incidence matrix H (E x N): row for edge i->j (i<j) has +1 at i and -1 at j.
pub fn incidence_matrix(graph: &RangingGraph) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(graph.edge_count(), graph.node_count());
    for (row, &(i, j)) in graph.edges().iter().enumerate() {
        h[(row, i)] = 1.0;
        h[(row, j)] = -1.0;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> RangingGraph {
        build_graph(2, 2, 3, &[(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]).unwrap()
    }

    #[test]
    fn edge_count_formula() {
        let g = example();
        assert_eq!(g.edge_count(), 6 + 3);
        assert_eq!(g.ranging_pair_count(), 6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_graph(2, 1, 0, &[]).is_err());
        assert!(build_graph(2, 2, 2, &[(2, 3)]).is_err());
        assert!(build_graph(2, 2, 2, &[(0, 0)]).is_err());
        assert!(build_graph(2, 2, 2, &[(0, 1), (1, 0)]).is_err());
        assert!(build_graph(2, 2, 2, &[(0, 9)]).is_err());
        assert!(build_graph(4, 2, 2, &[]).is_err());
    }

    #[test]
    fn canonical_order() {
        let g = build_graph(2, 3, 2, &[(1, 4), (0, 3), (2, 1), (0, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2), (0, 3), (1, 4), (3, 4)]);
        assert_eq!(g.neighbors(1), &[2, 4]);
    }

    #[test]
    fn incidence_rows_and_rank() {
        let g = example();
        let h = incidence_matrix(&g);
        assert_eq!(h.shape(), (9, 5));
        for r in 0..9 {
            assert_eq!(h.row(r).sum(), 0.0);
        }
        assert_eq!(crate::linalg::rank(&h, 1e-9), 4);
    }

    #[test]
    fn single_edge_incidence() {
        let g = build_graph(2, 1, 2, &[]).unwrap();
        let h = incidence_matrix(&g);
        assert_eq!(h.row(0).iter().cloned().collect::<Vec<_>>(), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn components() {
        let g = build_graph(2, 4, 2, &[(0, 1), (2, 3), (0, 4)]).unwrap();
        assert_eq!(g.tag_components(), vec![vec![0, 1], vec![2, 3]]);
    }
}
