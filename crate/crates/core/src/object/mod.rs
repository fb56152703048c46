//! Manipulated-object extraction from background trajectories.

mod ransac;
mod rigid;
mod segment;
mod similarity;
mod spectral;

pub use ransac::{ransac_rigid, RansacFit, RansacParams};
pub use rigid::{fit_residual, rotation_angle, umeyama_rigid_fit, RigidPose};
pub use segment::{pick_moving_cluster, segment_object, ObjectParams, ObjectResult};
pub use similarity::{trajectory_similarity, FrameWindow, TrajectorySimilarity};
pub use spectral::{kmeans, spectral_cluster_2, spectral_cluster_2_with, KMeansResult, SpectralParams};
