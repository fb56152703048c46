use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::cloud::{centroid, Point, Vec3};
use crate::error::{Error, Result};

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Rotation by `angle` about `axis` through `pivot`.
    pub fn about_axis(axis: &Vec3, angle: f64, pivot: &Point) -> Self {
        let r = *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).matrix();
        Self::new(r, pivot.coords - r * pivot.coords)
    }

    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose::new(rt, -(rt * self.translation))
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }

    /// Rotation angle and unit axis, `None` for (numerically) no rotation.
    pub fn axis_angle(&self) -> Option<(Vec3, f64)> {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        q.axis_angle().map(|(axis, angle)| (axis.into_inner(), angle))
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

/// Angle of a rotation matrix, robust near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2(|skew|, trace) is accurate at both ends, unlike acos
    let s = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() * 0.5;
    let c = (r.trace() - 1.0) * 0.5;
    s.atan2(c)
}

/// Relative tolerance on the second singular value of the source scatter
/// below which the points count as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

/// Least-squares rotation and translation (no scale) taking `src` onto `dst`,
/// with the sign correction that keeps `det(R) = +1`.
pub fn umeyama_rigid_fit(src: &[Point], dst: &[Point]) -> Result<RigidPose> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            what: "point pairs",
            expected: src.len(),
            found: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::Degenerate("rigid fit needs at least 3 point pairs"));
    }
    let mu_s = centroid(src).expect("non-empty");
    let mu_d = centroid(dst).expect("non-empty");
    let n = src.len() as f64;

    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s - mu_s, d - mu_d);
        cov += b * a.transpose();
        scatter += a * a.transpose();
    }
    cov /= n;
    scatter /= n;

    let sv = scatter.singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= COLLINEAR_TOL * sv[0] {
        return Err(Error::Degenerate("source points are collinear or coincident"));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut fix = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    // nalgebra does not order singular values; the correction must hit the smallest
    let smallest = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap_or(2);
    if smallest != 2 && fix[(2, 2)] < 0.0 {
        fix[(2, 2)] = 1.0;
        fix[(smallest, smallest)] = -1.0;
    }
    let rotation = u * fix * v_t;
    let translation = mu_d.coords - rotation * mu_s.coords;
    Ok(RigidPose::new(rotation, translation))
}

/// Sum of squared residuals of `pose` on the pairs.
pub fn fit_residual(pose: &RigidPose, src: &[Point], dst: &[Point]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| (pose.apply(s) - d).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn identity_on_equal_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = cloud(&mut rng, 10);
        let pose = umeyama_rigid_fit(&src, &src).unwrap();
        assert!((pose.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(pose.translation.amax() < 1e-12);
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = cloud(&mut rng, 20);
        let truth = RigidPose::new(
            *Rotation3::from_axis_angle(&Vec3::z_axis(), PI / 6.0).matrix(),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let dst: Vec<Point> = src.iter().map(|p| truth.apply(p)).collect();
        let pose = umeyama_rigid_fit(&src, &dst).unwrap();
        assert!((pose.rotation - truth.rotation).amax() < 1e-10);
        assert!((pose.translation - truth.translation).amax() < 1e-10);
    }

    #[test]
    fn reflection_still_yields_a_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = cloud(&mut rng, 30);
        let dst: Vec<Point> = src.iter().map(|p| Point::new(p.x, p.y, -p.z)).collect();
        let pose = umeyama_rigid_fit(&src, &dst).unwrap();
        assert!(pose.is_proper(1e-9));
        assert!(fit_residual(&pose, &src, &dst) > 1e-3);
    }

    #[test]
    fn planar_points_are_fine() {
        let src = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
        ];
        let truth = RigidPose::about_axis(&Vec3::new(1.0, 1.0, 0.0), 0.4, &Point::new(0.2, 0.0, 0.1));
        let dst: Vec<Point> = src.iter().map(|p| truth.apply(p)).collect();
        let pose = umeyama_rigid_fit(&src, &dst).unwrap();
        assert!((pose.rotation - truth.rotation).amax() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        let line = vec![Point::origin(), Point::new(1.0, 1.0, 1.0), Point::new(2.0, 2.0, 2.0)];
        assert!(matches!(umeyama_rigid_fit(&line, &line), Err(Error::Degenerate(_))));
        assert!(matches!(umeyama_rigid_fit(&line[..2], &line[..2]), Err(Error::Degenerate(_))));
        assert!(umeyama_rigid_fit(&line, &line[..2]).is_err());
    }

    #[test]
    fn residual_is_invariant_under_common_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = cloud(&mut rng, 25);
        let dst: Vec<Point> = cloud(&mut rng, 25);
        let g = RigidPose::about_axis(&Vec3::new(0.3, -1.0, 0.2), 1.1, &Point::new(0.5, 0.5, -2.0));
        let src2: Vec<Point> = src.iter().map(|p| g.apply(p)).collect();
        let dst2: Vec<Point> = dst.iter().map(|p| g.apply(p)).collect();
        let a = fit_residual(&umeyama_rigid_fit(&src, &dst).unwrap(), &src, &dst);
        let b = fit_residual(&umeyama_rigid_fit(&src2, &dst2).unwrap(), &src2, &dst2);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn angle_helpers() {
        let a = RigidPose::about_axis(&Vec3::z(), 0.3, &Point::origin());
        let b = RigidPose::about_axis(&Vec3::z(), 0.3 + 10f64.to_radians(), &Point::origin());
        assert!((a.rotation_angle_to(&b) - 10f64.to_radians()).abs() < 1e-12);
        let (axis, angle) = b.axis_angle().unwrap();
        assert!((axis - Vec3::z()).norm() < 1e-12);
        assert!((angle - (0.3 + 10f64.to_radians())).abs() < 1e-12);
        let c = a.compose(&a.inverse());
        assert!((c.rotation - Matrix3::identity()).amax() < 1e-15);
        assert!(rotation_angle(&Matrix3::identity()) == 0.0);
        let flip = RigidPose::about_axis(&Vec3::x(), PI, &Point::origin());
        assert!((rotation_angle(&flip.rotation) - PI).abs() < 1e-12);
    }
}
