//! Undirected neighborhood graphs over point clouds.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Symmetric adjacency lists without self-loops. Neighbor lists are sorted by
/// index; `edge_weights[i][n]` belongs to the edge `(i, adjacency[i][n])`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborhoodGraph {
    adjacency: Vec<Vec<usize>>,
    edge_weights: Vec<Vec<f64>>,
}

impl NeighborhoodGraph {
    /// Build from undirected weighted edges. Self-loops are dropped and
    /// duplicate edges keep the first weight seen.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        for (i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            if !(w >= 0.0) {
                return Err(Error::invalid("edge weights must be nonnegative"));
            }
            if i == j {
                continue;
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut adjacency = Vec::with_capacity(node_count);
        let mut edge_weights = Vec::with_capacity(node_count);
        for mut list in adj {
            // stable sort keeps the first weight for duplicates
            list.sort_by_key(|e| e.0);
            list.dedup_by_key(|e| e.0);
            adjacency.push(list.iter().map(|e| e.0).collect());
            edge_weights.push(list.iter().map(|e| e.1).collect());
        }
        Ok(Self {
            adjacency,
            edge_weights,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    #[inline]
    pub fn weights(&self, i: usize) -> &[f64] {
        &self.edge_weights[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each undirected edge once, as `(i, j, weight)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(move |(i, list)| {
            list.iter()
                .zip(&self.edge_weights[i])
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Induced subgraph on `nodes`; node `k` of the result is `nodes[k]`.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.node_count()];
        for (k, &n) in nodes.iter().enumerate() {
            map[n] = k;
        }
        let mut adjacency = Vec::with_capacity(nodes.len());
        let mut edge_weights = Vec::with_capacity(nodes.len());
        for &n in nodes {
            let mut list: Vec<(usize, f64)> = self.adjacency[n]
                .iter()
                .zip(&self.edge_weights[n])
                .filter(|(&j, _)| map[j] != usize::MAX)
                .map(|(&j, &w)| (map[j], w))
                .collect();
            list.sort_by_key(|e| e.0);
            adjacency.push(list.iter().map(|e| e.0).collect());
            edge_weights.push(list.iter().map(|e| e.1).collect());
        }
        Self {
            adjacency,
            edge_weights,
        }
    }
}

/// Edge `(i, j)` iff `0 < |x_i - x_j| <= radius`; weights are the distances.
pub fn build_proximity_graph(cloud: &PointCloud, radius: f64) -> Result<NeighborhoodGraph> {
    if !(radius > 0.0) {
        return Err(Error::invalid("proximity radius must be positive"));
    }
    if cloud.is_empty() {
        return Err(Error::invalid("proximity graph over an empty cloud"));
    }
    let tree = KdTree::from_cloud(cloud);
    let pts = cloud.positions();
    let mut edges = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        for j in tree.within_radius(p, radius) {
            if j > i {
                let d = (pts[j] - p).norm();
                if d > 0.0 {
                    edges.push((i, j, d));
                }
            }
        }
    }
    NeighborhoodGraph::from_edges(cloud.len(), edges)
}

/// Symmetrized k-nearest-neighbor graph; weights are the distances.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<NeighborhoodGraph> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cloud.len() < k + 1 {
        return Err(Error::invalid(alloc::format!(
            "a {k}-NN graph needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let tree = KdTree::from_cloud(cloud);
    let pts = cloud.positions();
    let mut edges = Vec::with_capacity(cloud.len() * k);
    for (i, p) in pts.iter().enumerate() {
        edges.extend(
            tree.knn(p, k + 1)
                .into_iter()
                .filter(|n| n.index != i)
                .take(k)
                .map(|n| (i, n.index, n.distance)),
        );
    }
    NeighborhoodGraph::from_edges(cloud.len(), edges)
}

/// Maximal connected node sets, each sorted, ordered by smallest member.
pub fn connected_components(graph: &NeighborhoodGraph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            for &j in graph.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
