use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::tracker::TrajectorySet;

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameWindow {
    pub start: usize,
    pub end: usize,
}

impl FrameWindow {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid("frame window start after end"));
        }
        Ok(Self { start, end })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frames(&self) -> core::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Pairwise rigidity affinity `exp(-(d_max - d_min)^2 / (2 sigma^2))`, where
/// `d_min`/`d_max` are the extreme distances between two trajectories over the
/// window. Pairs moving rigidly together score exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySimilarity {
    pub matrix: DMatrix<f64>,
    pub sigma: f64,
}

impl TrajectorySimilarity {
    /// Wrap a precomputed matrix after checking symmetry, unit diagonal and
    /// entries in `[0, 1]`.
    pub fn from_matrix(matrix: DMatrix<f64>, sigma: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::invalid("similarity matrix must be square"));
        }
        for i in 0..n {
            if matrix[(i, i)] != 1.0 {
                return Err(Error::invalid("similarity diagonal must be 1"));
            }
            for j in 0..n {
                let v = matrix[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != matrix[(j, i)] {
                    return Err(Error::invalid("similarity must be symmetric with entries in [0, 1]"));
                }
            }
        }
        Ok(Self { matrix, sigma })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

pub fn trajectory_similarity(
    traj: &TrajectorySet,
    candidates: &[usize],
    window: FrameWindow,
    sigma: f64,
) -> Result<TrajectorySimilarity> {
    if candidates.len() < 2 {
        return Err(Error::invalid("similarity needs at least two candidate trajectories"));
    }
    if window.end >= traj.frame_count() {
        return Err(Error::invalid("frame window exceeds the trajectories"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("similarity bandwidth must be positive"));
    }
    if candidates.iter().any(|&c| c >= traj.point_count()) {
        return Err(Error::invalid("candidate index out of range"));
    }
    let n = candidates.len();
    // positions[f][k] of candidate k in window frame f
    let positions: Vec<Vec<_>> = window
        .frames()
        .map(|f| {
            let p = traj.state(f).positions();
            candidates.iter().map(|&c| p[c]).collect()
        })
        .collect();
    let denom = 2.0 * sigma * sigma;
    let rows = par::map_indexed(n, |i| {
        (0..n)
            .map(|j| {
                if j <= i {
                    return 1.0;
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for frame in &positions {
                    let d = (frame[i] - frame[j]).norm();
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                let spread = hi - lo;
                (-(spread * spread) / denom).exp()
            })
            .collect::<Vec<f64>>()
    });
    let mut matrix = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in i + 1..n {
            matrix[(i, j)] = rows[i][j];
            matrix[(j, i)] = rows[i][j];
        }
    }
    Ok(TrajectorySimilarity { matrix, sigma })
}
