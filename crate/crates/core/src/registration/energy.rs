//! Residuals, analytic Jacobian and total cost of the warp-field objective
//!
//! ```text
//! E(T) = sum_pairs (n_d . (T_s(x_s) - y_d))^2
//!      + w_point * sum_pairs |T_s(x_s) - y_d|^2
//!      + w_stiff * sum_i sum_{j in N(i)} w_ij * sum_k huber_delta(T_i[k] - T_j[k])
//! ```
//!
//! with `w_ij = exp(-|x_i - x_j|^2 / (2 sigma_reg^2))`. The neighbor relation is
//! symmetric, so the double sum visits every undirected edge twice; we emit one
//! block of six residuals per undirected edge with the factor 2 folded into its
//! weight.
//!
//! The Huber term is linearized by iteratively reweighted least squares: the
//! stiffness residual is `sqrt(c * omega(a)) * a` with `omega` frozen at the
//! current parameters, so `2 J^T r` is the exact gradient of `E`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;


use crate::cloud::{Point, PointCloud, Vec3};
use crate::error::{ensure_len, Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::par;
use crate::solver::CsrMatrix;

use super::{CorrespondenceSet, RegistrationParams, WarpField};

/// Each undirected edge appears twice in the neighbor double sum.
pub const EDGE_MULTIPLICITY: f64 = 2.0;

/// Huber penalty scaled so the quadratic branch is exactly `a^2`:
/// `a^2` for `|a| <= delta`, `2 delta |a| - delta^2` beyond.
#[inline]
pub fn huber(a: f64, delta: f64) -> f64 {
    let m = a.abs();
    if m <= delta {
        a * a
    } else {
        2.0 * delta * m - delta * delta
    }
}

/// IRLS weight `huber'(a) / (2a)`.
#[inline]
pub fn huber_weight(a: f64, delta: f64) -> f64 {
    let m = a.abs();
    if m <= delta {
        1.0
    } else {
        delta / m
    }
}

/// Regularization edge between model points `i < j` with Gaussian weight `w_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Gaussian edge weights from the current model positions.
pub fn stiffness_edges(model: &PointCloud, graph: &NeighborhoodGraph, sigma_reg: f64) -> Vec<StiffnessEdge> {
    let pts = model.positions();
    let denom = 2.0 * sigma_reg * sigma_reg;
    graph
        .edges()
        .map(|(i, j, _)| StiffnessEdge {
            i,
            j,
            weight: (-(pts[i] - pts[j]).norm_squared() / denom).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub point_to_plane: f64,
    pub point_to_point: f64,
    /// Unweighted by `w_stiff`.
    pub stiffness: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    /// Point-to-plane rows, then point-to-point rows, then stiffness rows.
    pub residuals: Vec<f64>,
    pub jacobian: CsrMatrix,
}

/// The inputs shared by cost and Jacobian evaluation, validated once.
pub(crate) struct Problem<'a> {
    pub model: &'a [Point],
    pub target: &'a [Point],
    pub target_normals: &'a [Vec3],
    pub corr: &'a CorrespondenceSet,
    pub edges: &'a [StiffnessEdge],
    pub params: &'a RegistrationParams,
}

impl<'a> Problem<'a> {
    pub fn new(
        model: &'a PointCloud,
        target: &'a PointCloud,
        corr: &'a CorrespondenceSet,
        edges: &'a [StiffnessEdge],
        params: &'a RegistrationParams,
    ) -> Result<Self> {
        let target_normals = target
            .normals()
            .ok_or_else(|| Error::invalid("target cloud needs normals for the point-to-plane term"))?;
        if corr
            .pairs()
            .iter()
            .any(|c| c.source >= model.len() || c.target >= target.len())
        {
            return Err(Error::invalid("correspondence index out of range"));
        }
        if edges.iter().any(|e| e.i >= model.len() || e.j >= model.len()) {
            return Err(Error::invalid("graph edge out of range"));
        }
        Ok(Self {
            model: model.positions(),
            target: target.positions(),
            target_normals,
            corr,
            edges,
            params,
        })
    }

    pub fn cost(&self, warp: &WarpField) -> CostBreakdown {
        let t = warp.transforms();
        let mut plane = 0.0;
        let mut point = 0.0;
        for c in self.corr.pairs() {
            let d = t[c.source].apply_point(&self.model[c.source]) - self.target[c.target];
            let e = self.target_normals[c.target].dot(&d);
            plane += e * e;
            point += d.norm_squared();
        }
        let delta = self.params.delta;
        let mut stiff = 0.0;
        for e in self.edges {
            let (a, b) = (t[e.i].to_array(), t[e.j].to_array());
            let s: f64 = (0..6).map(|k| huber(a[k] - b[k], delta)).sum();
            stiff += EDGE_MULTIPLICITY * e.weight * s;
        }
        CostBreakdown {
            point_to_plane: plane,
            point_to_point: point,
            stiffness: stiff,
            total: plane + self.params.w_point * point + self.params.w_stiff * stiff,
        }
    }

    pub fn linearize(&self, warp: &WarpField) -> LinearizedSystem {
        let t = warp.transforms();
        let pairs = self.corr.pairs();
        let sqrt_wp = self.params.w_point.sqrt();

        // per pair: offset d = T(x) - y and dp/dparam as a 3x6 block
        let blocks = par::map_indexed(pairs.len(), |k| {
            let c = pairs[k];
            let x = &self.model[c.source];
            let (r, dr) = t[c.source].rotation_with_partials();
            let d = r * x + t[c.source].translation() - self.target[c.target];
            let mut jac = [[0.0; 6]; 3];
            for (a, dra) in dr.iter().enumerate() {
                let col = dra * x.coords;
                for row in 0..3 {
                    jac[row][a] = col[row];
                }
            }
            for row in 0..3 {
                jac[row][3 + row] = 1.0;
            }
            (d, jac)
        });

        let n_rows = pairs.len() * 4 + self.edges.len() * 6;
        let nnz = pairs.len() * 24 + self.edges.len() * 12;
        let mut residuals = Vec::with_capacity(n_rows);
        let mut jacobian = CsrMatrix::with_capacity(6 * warp.len(), n_rows, nnz);

        for (c, (d, jac)) in pairs.iter().zip(&blocks) {
            let n = &self.target_normals[c.target];
            residuals.push(n.dot(d));
            let base = 6 * c.source;
            jacobian.push_row((0..6).map(|a| (base + a, n.x * jac[0][a] + n.y * jac[1][a] + n.z * jac[2][a])));
        }
        for (c, (d, jac)) in pairs.iter().zip(&blocks) {
            let base = 6 * c.source;
            for row in 0..3 {
                residuals.push(sqrt_wp * d[row]);
                jacobian.push_row((0..6).map(|a| (base + a, sqrt_wp * jac[row][a])));
            }
        }

        let delta = self.params.delta;
        for e in self.edges {
            let (a, b) = (t[e.i].to_array(), t[e.j].to_array());
            let c = EDGE_MULTIPLICITY * self.params.w_stiff * e.weight;
            for k in 0..6 {
                let diff = a[k] - b[k];
                let s = (c * huber_weight(diff, delta)).sqrt();
                residuals.push(s * diff);
                jacobian.push_row([(6 * e.i + k, s), (6 * e.j + k, -s)]);
            }
        }

        LinearizedSystem {
            residuals,
            jacobian,
        }
    }
}

/// Stacked residual vector and sparse Jacobian (`6 |model|` columns) of the
/// objective at `warp`. The graph's Gaussian weights come from `model`.
pub fn residuals_and_jacobian(
    model: &PointCloud,
    target: &PointCloud,
    corr: &CorrespondenceSet,
    graph: &NeighborhoodGraph,
    warp: &WarpField,
    params: &RegistrationParams,
) -> Result<LinearizedSystem> {
    params.validate()?;
    ensure_len("warp field", model.len(), warp.len())?;
    ensure_len("regularization graph", model.len(), graph.node_count())?;
    let edges = stiffness_edges(model, graph, params.sigma_reg);
    Ok(Problem::new(model, target, corr, &edges, params)?.linearize(warp))
}

/// Value of the objective (true Huber, not its IRLS surrogate) at `warp`.
pub fn total_cost(
    model: &PointCloud,
    target: &PointCloud,
    corr: &CorrespondenceSet,
    graph: &NeighborhoodGraph,
    warp: &WarpField,
    params: &RegistrationParams,
) -> Result<CostBreakdown> {
    params.validate()?;
    ensure_len("warp field", model.len(), warp.len())?;
    ensure_len("regularization graph", model.len(), graph.node_count())?;
    let edges = stiffness_edges(model, graph, params.sigma_reg);
    Ok(Problem::new(model, target, corr, &edges, params)?.cost(warp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_knn_graph;
    use crate::registration::{Correspondence, LocalTransform};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huber_is_quadratic_inside_threshold() {
        let delta = 1e-4;
        for &a in &[0.0, 1e-5, -5e-5, 1e-4, -1e-4] {
            assert!((huber(a, delta) - a * a).abs() <= 1e-12);
        }
    }

    #[test]
    fn huber_is_asymptotically_linear() {
        let delta = 1e-4;
        // past the threshold the slope is exactly 2 delta
        let mut a = 1e-3;
        for _ in 0..8 {
            let slope = (huber(2.0 * a, delta) - huber(a, delta)) / a;
            assert!((slope - 2.0 * delta).abs() < 1e-12, "slope {slope}");
            a *= 4.0;
        }
        assert!(huber(1.0, delta) < 1.0);
    }

    #[test]
    fn huber_is_continuous_at_threshold() {
        let delta = 0.3;
        let below = huber(delta * (1.0 - 1e-12), delta);
        let above = huber(delta * (1.0 + 1e-12), delta);
        assert!((below - above).abs() < 1e-12);
    }

    fn plane_pair() -> (PointCloud, PointCloud, CorrespondenceSet) {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pts.push(Point::new(i as f64 * 0.01, j as f64 * 0.01, 0.5));
            }
        }
        let n = pts.len();
        let cloud = PointCloud::new(pts).with_normals(vec![Vec3::z(); n]).unwrap();
        let corr = CorrespondenceSet::new(
            (0..n).map(|i| Correspondence { source: i, target: i }).collect(),
            n,
            n,
        )
        .unwrap();
        (cloud.clone(), cloud, corr)
    }

    #[test]
    fn aligned_pairs_have_zero_data_residuals() {
        let (model, target, corr) = plane_pair();
        let graph = build_knn_graph(&model, 4).unwrap();
        let sys = residuals_and_jacobian(
            &model,
            &target,
            &corr,
            &graph,
            &WarpField::identity(model.len()),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(sys.residuals.len(), 4 * corr.len() + 6 * graph.edge_count());
        assert!(sys.residuals.iter().all(|r| *r == 0.0));
        assert_eq!(sys.jacobian.ncols(), 6 * model.len());
    }

    #[test]
    fn equal_transforms_have_zero_stiffness_residuals() {
        let (model, target, _) = plane_pair();
        let graph = build_knn_graph(&model, 4).unwrap();
        let t = LocalTransform::from_array([0.1, -0.2, 0.3, 0.01, 0.02, -0.03]);
        let warp = WarpField::new(vec![t; model.len()]).unwrap();
        let empty = CorrespondenceSet::default();
        let sys =
            residuals_and_jacobian(&model, &target, &empty, &graph, &warp, &Default::default()).unwrap();
        assert_eq!(sys.residuals.len(), 6 * graph.edge_count());
        assert!(sys.residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn missing_target_normals_is_an_error() {
        let (model, target, corr) = plane_pair();
        let graph = build_knn_graph(&model, 3).unwrap();
        let bare = target.without_normals();
        assert!(residuals_and_jacobian(
            &model,
            &bare,
            &corr,
            &graph,
            &WarpField::identity(model.len()),
            &Default::default()
        )
        .is_err());
    }

    #[test]
    fn residual_norm_matches_cost_in_quadratic_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (model, target, corr) = plane_pair();
        let graph = build_knn_graph(&model, 4).unwrap();
        let params = RegistrationParams {
            delta: 10.0,
            ..Default::default()
        };
        let warp = WarpField::from_params(
            &(0..6 * model.len()).map(|_| rng.random_range(-0.05..0.05)).collect::<Vec<_>>(),
        )
        .unwrap();
        let sys = residuals_and_jacobian(&model, &target, &corr, &graph, &warp, &params).unwrap();
        let cost = total_cost(&model, &target, &corr, &graph, &warp, &params).unwrap();
        let sq: f64 = sys.residuals.iter().map(|r| r * r).sum();
        assert!((sq - cost.total).abs() <= 1e-12 * cost.total.max(1.0));
    }
}
