//! Point clouds, pinhole cameras and RGB-D back-projection.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Point3, Vector3};

use crate::error::{ensure_len, Error, Result};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance on `|n| - 1` for stored normals.
pub const UNIT_NORMAL_TOL: f64 = 1e-6;

/// Depth beyond which back-projected pixels are dropped unless overridden.
pub const DEFAULT_MAX_DEPTH: f64 = 4.0;

/// Positions with optional per-point unit normals and RGB colors in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point>,
    normals: Option<Vec<Vec3>>,
    colors: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point>) -> Self {
        Self {
            positions,
            normals: None,
            colors: None,
        }
    }

    pub fn from_parts(
        positions: Vec<Point>,
        normals: Option<Vec<Vec3>>,
        colors: Option<Vec<Vec3>>,
    ) -> Result<Self> {
        let mut cloud = Self::new(positions);
        if let Some(n) = normals {
            cloud = cloud.with_normals(n)?;
        }
        if let Some(c) = colors {
            cloud = cloud.with_colors(c)?;
        }
        Ok(cloud)
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        ensure_len("normals", self.positions.len(), normals.len())?;
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= UNIT_NORMAL_TOL))
        {
            return Err(Error::invalid(format!(
                "normal {i} is not unit length (|n| = {})",
                normals[i].norm()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_colors(mut self, colors: Vec<Vec3>) -> Result<Self> {
        ensure_len("colors", self.positions.len(), colors.len())?;
        if let Some(i) = colors
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::invalid(format!("color {i} outside [0, 1]")));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    #[inline]
    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    #[inline]
    pub fn colors(&self) -> Option<&[Vec3]> {
        self.colors.as_deref()
    }

    /// Sub-cloud made of `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        centroid(&self.positions)
    }

    /// Replace positions and normals in one go, keeping colors. Used by warping,
    /// which preserves unit length by construction.
    pub(crate) fn with_moved_geometry(&self, positions: Vec<Point>, normals: Option<Vec<Vec3>>) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        PointCloud {
            positions,
            normals,
            colors: self.colors.clone(),
        }
    }
}

pub fn centroid(points: &[Point]) -> Option<Point> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Some(Point::from(sum / points.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid("cx outside [0, width)"));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid("cy outside [0, height)"));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Camera-frame point for pixel `(u, v)` at depth `z`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point {
        Point::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// `(u, v, z)` of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: &Point) -> (f64, f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        )
    }
}

/// Registered depth + color image pair. Row-major, depth in meters, 0 = invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame {
    pub depth: Vec<f64>,
    pub color: Vec<Vec3>,
    pub intrinsics: CameraIntrinsics,
}

impl RgbdFrame {
    pub fn new(depth: Vec<f64>, color: Vec<Vec3>, intrinsics: CameraIntrinsics) -> Result<Self> {
        let frame = Self {
            depth,
            color,
            intrinsics,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        ensure_len("depth image", self.intrinsics.pixel_count(), self.depth.len())?;
        ensure_len("color image", self.intrinsics.pixel_count(), self.color.len())
    }
}

/// Back-project every valid pixel, dropping depths beyond [`DEFAULT_MAX_DEPTH`].
pub fn back_project(frame: &RgbdFrame) -> Result<PointCloud> {
    back_project_with(frame, DEFAULT_MAX_DEPTH)
}

/// Back-project every pixel with `0 < depth <= max_depth` (non-finite depths are skipped).
pub fn back_project_with(frame: &RgbdFrame, max_depth: f64) -> Result<PointCloud> {
    frame.validate()?;
    let k = &frame.intrinsics;
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for v in 0..k.height {
        for u in 0..k.width {
            let idx = v * k.width + u;
            let z = frame.depth[idx];
            if !(z > 0.0 && z <= max_depth) {
                continue;
            }
            positions.push(k.unproject(u as f64, v as f64, z));
            colors.push(frame.color[idx]);
        }
    }
    PointCloud::new(positions).with_colors(colors)
}

/// Voxel-grid downsampling. Each occupied voxel keeps the member point closest
/// to the voxel mean, so every output point is an actual input point. Output
/// order follows the first input index seen in each voxel. Returns the cloud
/// and the kept input indices.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<(PointCloud, Vec<usize>)> {
    if !(leaf > 0.0) {
        return Err(Error::invalid("voxel leaf size must be positive"));
    }
    let mut slots: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, p) in cloud.positions().iter().enumerate() {
        let key = (
            (p.x / leaf).floor() as i64,
            (p.y / leaf).floor() as i64,
            (p.z / leaf).floor() as i64,
        );
        let slot = *slots.entry(key).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[slot].push(i);
    }
    let positions = cloud.positions();
    let kept: Vec<usize> = members
        .iter()
        .map(|m| {
            let mean = centroid(&m.iter().map(|&i| positions[i]).collect::<Vec<_>>())
                .expect("voxel has at least one member");
            let mut best = m[0];
            let mut best_d = f64::INFINITY;
            for &i in m {
                let d = (positions[i] - mean).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok((cloud.select(&kept), kept))
}
