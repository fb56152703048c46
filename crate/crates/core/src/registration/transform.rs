use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::Matrix3;

use crate::cloud::{Point, PointCloud, Vec3};
use crate::error::{ensure_len, Error, Result};

/// Rigid transform `x -> R(alpha, beta, gamma) x + t` about the global origin,
/// with `R = Rz(gamma) * Ry(beta) * Rx(alpha)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalTransform {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

fn rot_x(a: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = a.sin_cos();
    (
        Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s),
    )
}

fn rot_y(b: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = b.sin_cos();
    (
        Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s),
    )
}

fn rot_z(g: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = g.sin_cos();
    (
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0),
    )
}

impl LocalTransform {
    pub const IDENTITY: Self = Self {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
    };

    #[inline]
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
        }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 6] {
        [self.alpha, self.beta, self.gamma, self.tx, self.ty, self.tz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.tx, self.ty, self.tz)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.gamma).0 * rot_y(self.beta).0 * rot_x(self.alpha).0
    }

    /// Rotation together with its partials w.r.t. alpha, beta and gamma.
    pub fn rotation_with_partials(&self) -> (Matrix3<f64>, [Matrix3<f64>; 3]) {
        let (rx, drx) = rot_x(self.alpha);
        let (ry, dry) = rot_y(self.beta);
        let (rz, drz) = rot_z(self.gamma);
        (
            rz * ry * rx,
            [rz * ry * drx, rz * dry * rx, drz * ry * rx],
        )
    }

    #[inline]
    pub fn apply_point(&self, p: &Point) -> Point {
        self.rotation() * p + self.translation()
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation() * v
    }
}

/// One local transform per model point.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    transforms: Vec<LocalTransform>,
}

impl WarpField {
    pub fn identity(n: usize) -> Self {
        Self {
            transforms: vec![LocalTransform::IDENTITY; n],
        }
    }

    pub fn new(transforms: Vec<LocalTransform>) -> Result<Self> {
        if let Some(i) = transforms.iter().position(|t| !t.is_finite()) {
            return Err(Error::invalid(alloc::format!("transform {i} is not finite")));
        }
        Ok(Self { transforms })
    }

    /// From a flat `[alpha beta gamma tx ty tz]*` parameter vector.
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() % 6 != 0 {
            return Err(Error::invalid("warp parameter count must be a multiple of 6"));
        }
        Self::new(
            params
                .chunks_exact(6)
                .map(|c| LocalTransform::from_array([c[0], c[1], c[2], c[3], c[4], c[5]]))
                .collect(),
        )
    }

    pub fn params(&self) -> Vec<f64> {
        self.transforms.iter().flat_map(|t| t.to_array()).collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    #[inline]
    pub fn transforms(&self) -> &[LocalTransform] {
        &self.transforms
    }

    /// `self - scale * step`, the Gauss-Newton update.
    pub(crate) fn stepped(&self, step: &[f64], scale: f64) -> Self {
        debug_assert_eq!(step.len(), 6 * self.len());
        Self {
            transforms: self
                .transforms
                .iter()
                .zip(step.chunks_exact(6))
                .map(|(t, s)| {
                    let mut v = t.to_array();
                    for (a, b) in v.iter_mut().zip(s) {
                        *a -= scale * b;
                    }
                    LocalTransform::from_array(v)
                })
                .collect(),
        }
    }

    /// Apply the field to a set of points, ignoring normals.
    pub fn apply_points(&self, points: &[Point]) -> Vec<Point> {
        points
            .iter()
            .zip(&self.transforms)
            .map(|(p, t)| t.apply_point(p))
            .collect()
    }
}

/// Move each model point by its own transform; normals are rotated only.
pub fn apply_warp(model: &PointCloud, warp: &WarpField) -> Result<PointCloud> {
    ensure_len("warp field", model.len(), warp.len())?;
    let mut positions = Vec::with_capacity(model.len());
    let mut normals = model.normals().map(|_| Vec::with_capacity(model.len()));
    for (i, t) in warp.transforms().iter().enumerate() {
        let r = t.rotation();
        positions.push(r * model.positions()[i] + t.translation());
        if let (Some(out), Some(src)) = (normals.as_mut(), model.normals()) {
            out.push(r * src[i]);
        }
    }
    Ok(model.with_moved_geometry(positions, normals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_warp_is_identity() {
        let cloud = PointCloud::new(vec![Point::new(1.0, 2.0, 3.0), Point::new(-1.0, 0.5, 0.0)])
            .with_normals(vec![Vec3::x(), Vec3::y()])
            .unwrap();
        assert_eq!(apply_warp(&cloud, &WarpField::identity(2)).unwrap(), cloud);
    }

    #[test]
    fn quarter_turn_about_z() {
        let cloud = PointCloud::new(vec![Point::new(1.0, 0.0, 0.0)]);
        let warp = WarpField::new(vec![LocalTransform {
            gamma: FRAC_PI_2,
            ..Default::default()
        }])
        .unwrap();
        let out = apply_warp(&cloud, &warp).unwrap();
        assert!((out.positions()[0] - Point::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn translation_leaves_normals_alone() {
        let n = Vec3::new(0.6, 0.0, 0.8);
        let cloud = PointCloud::new(vec![Point::new(1.0, 2.0, 3.0), Point::origin()])
            .with_normals(vec![n, Vec3::z()])
            .unwrap();
        let t = LocalTransform {
            tz: 0.1,
            ..Default::default()
        };
        let out = apply_warp(&cloud, &WarpField::new(vec![t, t]).unwrap()).unwrap();
        assert!((out.positions()[0] - Point::new(1.0, 2.0, 3.1)).norm() < 1e-15);
        assert!((out.positions()[1] - Point::new(0.0, 0.0, 0.1)).norm() < 1e-15);
        assert_eq!(out.normals().unwrap(), &[n, Vec3::z()]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let cloud = PointCloud::new(vec![Point::origin()]);
        assert!(apply_warp(&cloud, &WarpField::identity(2)).is_err());
    }

    #[test]
    fn composition_order_is_z_y_x() {
        let t = LocalTransform {
            alpha: 0.3,
            beta: -0.2,
            gamma: 0.7,
            ..Default::default()
        };
        let expected = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), 0.7)
            * nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), -0.2)
            * nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), 0.3);
        assert!((t.rotation() - expected.matrix()).norm() < 1e-14);
    }

    #[test]
    fn rotation_partials_match_finite_differences() {
        let base = [0.4, -0.3, 1.1, 0.0, 0.0, 0.0];
        let (_, partials) = LocalTransform::from_array(base).rotation_with_partials();
        let h = 1e-6;
        for k in 0..3 {
            let mut p = base;
            let mut m = base;
            p[k] += h;
            m[k] -= h;
            let fd = (LocalTransform::from_array(p).rotation() - LocalTransform::from_array(m).rotation())
                / (2.0 * h);
            assert!((fd - partials[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn non_finite_transforms_are_rejected() {
        assert!(WarpField::from_params(&[0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(WarpField::from_params(&[0.0; 7]).is_err());
    }
}
