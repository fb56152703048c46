//! Non-rigid ICP: a per-point 6-DOF warp field fitted by alternating
//! correspondence search and regularized Gauss-Newton.

mod correspondence;
mod energy;
mod params;
mod register;
mod transform;

pub use correspondence::{find_correspondences, find_correspondences_in, Correspondence, CorrespondenceSet};
pub use energy::{
    huber, huber_weight, residuals_and_jacobian, stiffness_edges, total_cost, CostBreakdown, LinearizedSystem,
    StiffnessEdge, EDGE_MULTIPLICITY,
};
pub use params::RegistrationParams;
pub use register::{register, register_with_graph, RegistrationReport, StepRecord};
pub use transform::{apply_warp, LocalTransform, WarpField};
