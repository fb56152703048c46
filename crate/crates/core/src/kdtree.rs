//! Exact kd-tree over 3D points with median splits.
//!
//! Ties in distance are broken by point index so every query has a single
//! well-defined answer, which lets tests compare against brute force exactly.

use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;


use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Candidate {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&other.dist2)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn from_cloud(cloud: &PointCloud) -> Self {
        Self::new(cloud.positions())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of largest spread
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap_or(Ordering::Equal))
            .unwrap_or(0);
        if !(hi[axis] > lo[axis]) {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(Ordering::Equal)
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points, ascending by distance (then index).
    pub fn knn(&self, query: &Point, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut best: Vec<Candidate> = Vec::with_capacity(k + 1);
        self.knn_rec(0, query, k, &mut best);
        best.into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }

    fn knn_rec(&self, node: usize, q: &Point, k: usize, best: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: (self.points[i] - q).norm_squared(),
                        index: i,
                    };
                    if best.len() == k && c.cmp_key(&best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|b| b.cmp_key(&c))
                        .unwrap_or_else(|p| p);
                    best.insert(pos, c);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].dist2 {
                    self.knn_rec(far, q, k, best);
                }
            }
        }
    }

    pub fn nearest(&self, query: &Point) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    /// Indices of all points with distance `<= radius`, ascending by index.
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() && radius >= 0.0 {
            self.radius_rec(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, q: &Point, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}

/// One-shot k-nearest-neighbor query against a cloud.
pub fn knn_search(cloud: &PointCloud, query: &Point, k: usize) -> Result<Vec<(usize, f64)>> {
    if cloud.is_empty() {
        return Err(Error::invalid("knn search on an empty cloud"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(KdTree::from_cloud(cloud)
        .knn(query, k)
        .into_iter()
        .map(|n| (n.index, n.distance))
        .collect())
}
