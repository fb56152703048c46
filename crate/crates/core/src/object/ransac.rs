use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::Point;
use crate::error::{Error, Result};

use super::rigid::{umeyama_rigid_fit, RigidPose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Max post-fit residual (m) of an inlier pair.
    pub inlier_dist: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_dist: 0.01,
            iterations: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub pose: RigidPose,
    /// Ascending pair indices with residual `<= inlier_dist` under `pose`.
    pub inliers: Vec<usize>,
}

fn inliers_of(pose: &RigidPose, src: &[Point], dst: &[Point], dist: f64) -> Vec<usize> {
    (0..src.len())
        .filter(|&i| (pose.apply(&src[i]) - dst[i]).norm() <= dist)
        .collect()
}

/// Refits after consensus stop once the inlier set stops changing.
const MAX_REFITS: usize = 5;

/// Hypothesize-and-verify rigid fit from minimal 3-pair samples, refit on the
/// winning consensus set.
pub fn ransac_rigid(src: &[Point], dst: &[Point], params: &RansacParams) -> Result<RansacFit> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            what: "point pairs",
            expected: src.len(),
            found: dst.len(),
        });
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::Degenerate("RANSAC needs at least 3 point pairs"));
    }
    if !(params.inlier_dist >= 0.0) {
        return Err(Error::invalid("inlier distance must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..params.iterations {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut c = rng.random_range(0..n - 2);
        for lo in [a.min(b), a.max(b)] {
            if c >= lo {
                c += 1;
            }
        }
        let sample_src = [src[a], src[b], src[c]];
        let sample_dst = [dst[a], dst[b], dst[c]];
        let Ok(pose) = umeyama_rigid_fit(&sample_src, &sample_dst) else {
            continue;
        };
        let inliers = inliers_of(&pose, src, dst, params.inlier_dist);
        if inliers.len() > best.len() {
            best = inliers;
            if best.len() == n {
                break;
            }
        }
    }
    if best.len() < 3 {
        return Err(Error::NoConsensus);
    }

    let mut inliers = best;
    let mut pose = RigidPose::identity();
    for _ in 0..MAX_REFITS {
        let s: Vec<Point> = inliers.iter().map(|&i| src[i]).collect();
        let d: Vec<Point> = inliers.iter().map(|&i| dst[i]).collect();
        pose = match umeyama_rigid_fit(&s, &d) {
            Ok(p) => p,
            Err(_) => return Err(Error::NoConsensus),
        };
        let next = inliers_of(&pose, src, dst, params.inlier_dist);
        if next == inliers {
            break;
        }
        if next.len() < 3 {
            return Err(Error::NoConsensus);
        }
        inliers = next;
    }
    // report the inliers of the pose actually returned
    let inliers = inliers_of(&pose, src, dst, params.inlier_dist);
    Ok(RansacFit { pose, inliers })
}
