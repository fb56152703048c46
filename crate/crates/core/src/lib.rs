//! Geometry and optimization core for extracting actor-environment contacts
//! and manipulated rigid objects from RGB-D point cloud sequences.
//!
//! The first frame becomes a fixed scene model that is warped onto every
//! later frame by non-rigid ICP, which yields one dense trajectory per model
//! point. Trajectories are split into actor and background, contacts are found
//! by thresholding the inter-cluster distance, and the object moved during each
//! contact is segmented by spectral clustering of trajectories followed by
//! RANSAC rigid fits.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! synthetic test scenes live in the `manipseg` crate.

#![no_std]

extern crate alloc;

pub mod actor;
pub mod cloud;
pub mod contact;
mod error;
pub mod graph;
pub mod kdtree;
pub mod normals;
pub mod object;
mod par;
pub mod registration;
pub mod solver;
pub mod tracker;

pub use cloud::{
    back_project, back_project_with, voxel_downsample, CameraIntrinsics, Point, PointCloud, RgbdFrame, Vec3,
};
pub use error::{Error, Result};
pub use graph::{build_knn_graph, build_proximity_graph, connected_components, NeighborhoodGraph};
pub use kdtree::{knn_search, KdTree, Neighbor};
pub use normals::{estimate_normals, NormalEstimate};
pub use registration::{apply_warp, register, LocalTransform, RegistrationParams, WarpField};
pub use tracker::{track_sequence, Label, LabeledTrajectorySet, TrajectorySet};
