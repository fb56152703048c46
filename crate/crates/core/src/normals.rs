//! k-NN PCA normal estimation.

use alloc::vec::Vec;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::cloud::{Point, PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

pub const DEFAULT_NORMAL_K: usize = 10;

/// Neighborhoods whose second covariance eigenvalue falls below this fraction
/// of the largest are treated as rank-deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    /// Input cloud with normals attached.
    pub cloud: PointCloud,
    /// `false` where the neighborhood was degenerate. Such points carry the
    /// unit direction towards the viewpoint as a placeholder normal.
    pub valid: Vec<bool>,
}

impl NormalEstimate {
    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// Smallest-eigenvalue eigenvector of each point's k-NN covariance (the point
/// itself included), flipped to face `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(Error::invalid("normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(Error::invalid(alloc::format!(
            "normal estimation with k = {k} needs at least {k} points, got {}",
            cloud.len()
        )));
    }
    let tree = KdTree::from_cloud(cloud);
    let pts = cloud.positions();
    let (normals, valid): (Vec<Vec3>, Vec<bool>) =
        pts.iter().map(|p| normal_at(&tree, p, k, viewpoint)).unzip();
    Ok(NormalEstimate {
        cloud: cloud.clone().with_normals(normals)?,
        valid,
    })
}

fn normal_at(tree: &KdTree, p: &Point, k: usize, viewpoint: &Point) -> (Vec3, bool) {
    let pts = tree.points();
    let nbrs = tree.knn(p, k);
    let mean = nbrs.iter().fold(Vec3::zeros(), |a, n| a + pts[n.index].coords) / nbrs.len() as f64;
    let cov = nbrs.iter().fold(Matrix3::zeros(), |a, n| {
        let d = pts[n.index].coords - mean;
        a + d * d.transpose()
    }) / nbrs.len() as f64;

    let to_view = viewpoint - p;
    let fallback = if to_view.norm() > 0.0 {
        to_view.normalize()
    } else {
        Vec3::z()
    };

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l_max > 0.0) || l_mid <= RANK_TOL * l_max {
        return (fallback, false);
    }
    let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    if n.dot(&to_view) < 0.0 {
        n = -n;
    }
    (n, true)
}
