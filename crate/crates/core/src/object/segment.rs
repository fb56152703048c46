use alloc::vec::Vec;

use crate::cloud::Point;
use crate::contact::ContactEvent;
use crate::error::{Error, Result};
use crate::par;
use crate::tracker::{LabeledTrajectorySet, TrajectorySet};

use super::ransac::{ransac_rigid, RansacParams};
use super::rigid::{umeyama_rigid_fit, RigidPose};
use super::similarity::{trajectory_similarity, FrameWindow};
use super::spectral::{spectral_cluster_2_with, SpectralParams, DEFAULT_KMEANS_RESTARTS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectParams {
    /// Radius (m) around the contact centroid at the first contact frame.
    pub attention_radius: f64,
    /// Similarity kernel bandwidth (m).
    pub sigma: f64,
    pub ransac: RansacParams,
    pub kmeans_restarts: usize,
    pub cluster_seed: u64,
}

impl Default for ObjectParams {
    fn default() -> Self {
        Self {
            attention_radius: 0.25,
            sigma: 0.01,
            ransac: RansacParams::default(),
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            cluster_seed: 0x5eed,
        }
    }
}

impl ObjectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.attention_radius > 0.0) {
            return Err(Error::invalid("attention radius must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("similarity sigma must be positive"));
        }
        if !(self.ransac.inlier_dist > 0.0) {
            return Err(Error::invalid("RANSAC inlier distance must be positive"));
        }
        if self.ransac.iterations == 0 || self.kmeans_restarts == 0 {
            return Err(Error::invalid("RANSAC iterations and k-means restarts must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectResult {
    pub window: FrameWindow,
    /// Background points inside the attention radius.
    pub candidates: Vec<usize>,
    /// The moving cluster picked from the candidates.
    pub initial_cluster: Vec<usize>,
    /// Background points consistent with every per-frame motion.
    pub segment: Vec<usize>,
    /// Poses refit on `segment`, one per window frame; the first is identity.
    pub poses: Vec<RigidPose>,
    /// Per-frame RANSAC estimates on the initial cluster.
    pub ransac_poses: Vec<RigidPose>,
    /// Background points consistent with each frame's RANSAC pose.
    pub frame_inliers: Vec<Vec<usize>>,
}

impl ObjectResult {
    pub fn pose_at(&self, frame: usize) -> Option<&RigidPose> {
        frame
            .checked_sub(self.window.start)
            .and_then(|k| self.poses.get(k))
    }

    /// `(frame, |I^t|)` for every window frame.
    pub fn inlier_counts(&self) -> Vec<(usize, usize)> {
        self.window
            .frames()
            .zip(&self.frame_inliers)
            .map(|(f, i)| (f, i.len()))
            .collect()
    }
}

fn path_length(traj: &TrajectorySet, point: usize, window: FrameWindow) -> f64 {
    (window.start + 1..=window.end)
        .map(|f| (traj.position(f, point) - traj.position(f - 1, point)).norm())
        .sum()
}

/// Which of the two clusters moves most: the larger mean path length over the
/// window. On a tie, the cluster holding the point nearest to `contact` at the
/// window start wins, and after that the first cluster.
pub fn pick_moving_cluster(
    traj: &TrajectorySet,
    clusters: &[Vec<usize>; 2],
    window: FrameWindow,
    contact: &Point,
) -> Result<usize> {
    if clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::invalid("clusters must be non-empty"));
    }
    if window.end >= traj.frame_count() {
        return Err(Error::invalid("frame window exceeds the trajectories"));
    }
    let motion: Vec<f64> = clusters
        .iter()
        .map(|c| c.iter().map(|&i| path_length(traj, i, window)).sum::<f64>() / c.len() as f64)
        .collect();
    if motion[0] > motion[1] {
        return Ok(0);
    }
    if motion[1] > motion[0] {
        return Ok(1);
    }
    let nearest = |c: &[usize]| {
        c.iter()
            .map(|&i| (traj.position(window.start, i) - contact).norm())
            .fold(f64::INFINITY, f64::min)
    };
    Ok(if nearest(&clusters[1]) < nearest(&clusters[0]) { 1 } else { 0 })
}

/// Extract the rigid object handled during `event`.
pub fn segment_object(traj: &LabeledTrajectorySet, event: &ContactEvent, params: &ObjectParams) -> Result<ObjectResult> {
    params.validate()?;
    let t = &traj.trajectories;
    let window = FrameWindow::new(event.start_frame, event.end_frame)?;
    if window.end >= t.frame_count() {
        return Err(Error::invalid("contact event exceeds the trajectories"));
    }
    let Some(contact) = event.centroids.first() else {
        return Err(Error::invalid("contact event has no centroids"));
    };

    let background = traj.background_indices();
    let start_pos = t.state(window.start).positions();
    let candidates: Vec<usize> = background
        .iter()
        .copied()
        .filter(|&i| (start_pos[i] - contact).norm() <= params.attention_radius)
        .collect();
    if candidates.len() < 2 {
        return Err(Error::invalid("fewer than two background points inside the attention radius"));
    }

    let sim = trajectory_similarity(t, &candidates, window, params.sigma)?;
    let local = spectral_cluster_2_with(
        &sim,
        &SpectralParams {
            seed: params.cluster_seed,
            restarts: params.kmeans_restarts,
        },
    )?;
    let clusters = local.map(|c| c.into_iter().map(|k| candidates[k]).collect::<Vec<_>>());
    let picked = pick_moving_cluster(t, &clusters, window, contact)?;
    let initial_cluster = clusters[picked].clone();

    let src: Vec<Point> = initial_cluster.iter().map(|&i| start_pos[i]).collect();
    let bg_start: Vec<Point> = background.iter().map(|&i| start_pos[i]).collect();
    let per_frame = par::map_indexed(window.len(), |k| -> Result<(RigidPose, Vec<usize>)> {
        let f = window.start + k;
        if k == 0 {
            return Ok((RigidPose::identity(), background.clone()));
        }
        let pos = t.state(f).positions();
        let dst: Vec<Point> = initial_cluster.iter().map(|&i| pos[i]).collect();
        let ransac = RansacParams {
            seed: params.ransac.seed.wrapping_add(f as u64),
            ..params.ransac
        };
        let fit = ransac_rigid(&src, &dst, &ransac)?;
        let inliers = background
            .iter()
            .zip(&bg_start)
            .filter(|(&i, p)| (fit.pose.apply(p) - pos[i]).norm() <= params.ransac.inlier_dist)
            .map(|(&i, _)| i)
            .collect();
        Ok((fit.pose, inliers))
    });
    let mut ransac_poses = Vec::with_capacity(window.len());
    let mut frame_inliers = Vec::with_capacity(window.len());
    for r in per_frame {
        let (pose, inl) = r?;
        ransac_poses.push(pose);
        frame_inliers.push(inl);
    }

    // both lists are sorted, so the intersection is a merge
    let mut segment = frame_inliers[0].clone();
    for inl in &frame_inliers[1..] {
        let mut j = 0;
        segment.retain(|&i| {
            while j < inl.len() && inl[j] < i {
                j += 1;
            }
            j < inl.len() && inl[j] == i
        });
    }
    if segment.is_empty() {
        return Err(Error::ObjectLost {
            inlier_counts: window.frames().zip(&frame_inliers).map(|(f, i)| (f, i.len())).collect(),
        });
    }

    let seg_start: Vec<Point> = segment.iter().map(|&i| start_pos[i]).collect();
    let poses = window
        .frames()
        .enumerate()
        .map(|(k, f)| {
            if k == 0 {
                return RigidPose::identity();
            }
            let pos = t.state(f).positions();
            let dst: Vec<Point> = segment.iter().map(|&i| pos[i]).collect();
            // a degenerate segment keeps the RANSAC estimate
            umeyama_rigid_fit(&seg_start, &dst).unwrap_or(ransac_poses[k])
        })
        .collect();

    Ok(ObjectResult {
        window,
        candidates,
        initial_cluster,
        segment,
        poses,
        ransac_poses,
        frame_inliers,
    })
}
