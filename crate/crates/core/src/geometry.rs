//! Coordinate frames, ground-plane Gaussian task regions and planar hull
//! primitives.
//!
//! World frame: z-up, the ground plane is xy, meters. Camera body frame and
//! ego frame both use x forward, y left, z up. The ego frame of a viewer has
//! its origin at the camera position and its x axis along the gravity-aligned
//! camera heading.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Floor applied to fitted region spreads, meters.
pub const SIGMA_MIN: f64 = 0.05;

/// Number of boundary points used when a circle is turned into a polygon.
pub const DEFAULT_CIRCLE_POINTS: usize = 16;

const QUATERNION_NORM_TOL: f64 = 1e-6;
const VERTICAL_TOL: f64 = 1e-6;

/// Camera pose in the world frame. The orientation rotates body-frame
/// vectors (x forward, y left, z up) into the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion<f64>,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quaternion<f64>) -> Self {
        Self { position, orientation }
    }

    /// Pose from position and intrinsic z-y-x Euler angles. Positive pitch
    /// tilts the forward axis downward.
    pub fn from_euler(position: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        let q = UnitQuaternion::from_euler_angles(roll, pitch, yaw);
        Self::new(position, q.into_inner())
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = &self.orientation;
        [q.w, q.i, q.j, q.k]
    }

    pub fn check(&self) -> Result<()> {
        let norm = self.orientation.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(Error::InvalidPose { norm });
        }
        Ok(())
    }
}

/// Camera pose with pitch and roll removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityAlignedPose {
    pub position: Vec3,
    /// Heading in (-pi, pi].
    pub yaw: f64,
}

impl GravityAlignedPose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw: wrap_angle(yaw) }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.sin().atan2(angle.cos());
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

/// Removes pitch and roll from a camera pose, keeping the heading of the
/// forward axis on the ground plane. A camera looking straight up or down
/// takes its heading from the projected up axis instead.
pub fn gravity_align(pose: &Pose) -> Result<GravityAlignedPose> {
    pose.check()?;
    let rotation = UnitQuaternion::from_quaternion(pose.orientation);
    let forward = rotation * Vec3::x();
    let horizontal = forward.xy().norm();
    let axis = if horizontal <= VERTICAL_TOL { rotation * Vec3::z() } else { forward };
    let yaw = axis.y.atan2(axis.x);
    Ok(GravityAlignedPose::new(pose.position, yaw))
}

/// Isotropic Gaussian task region: a 3D mean with a standard deviation that
/// applies to both ground-plane axes (covariance `sigma^2 * I2` on xy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundGaussian {
    pub mean: Vec3,
    pub sigma: f64,
}

impl GroundGaussian {
    pub fn new(mean: Vec3, sigma: f64) -> Self {
        debug_assert!(sigma >= 0.0, "negative sigma {sigma}");
        Self { mean, sigma }
    }

    pub fn covariance_xy(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::identity() * (self.sigma * self.sigma)
    }
}

fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).matrix()
}

/// Expresses a world-frame region in the ego frame of `viewer`:
/// `R_z(-yaw) * (mean - viewer.position)`. Sigma is unchanged because the
/// covariance is isotropic on the ground plane.
pub fn rectify(region: &GroundGaussian, viewer: &GravityAlignedPose) -> GroundGaussian {
    let offset = region.mean - viewer.position;
    GroundGaussian { mean: yaw_rotation(-viewer.yaw) * offset, sigma: region.sigma }
}

/// Inverse of [`rectify`]: takes an ego-frame region back to the world frame.
pub fn unrectify(region: &GroundGaussian, viewer: &GravityAlignedPose) -> GroundGaussian {
    GroundGaussian { mean: yaw_rotation(viewer.yaw) * region.mean + viewer.position, sigma: region.sigma }
}

/// 2-Wasserstein (Frechet) distance between two isotropic ground-plane
/// Gaussians with 3D means:
/// `sqrt(|mu_a - mu_b|^2 + 2 (sigma_a - sigma_b)^2)`.
pub fn frechet_distance(a: &GroundGaussian, b: &GroundGaussian) -> f64 {
    let ds = a.sigma - b.sigma;
    ((a.mean - b.mean).norm_squared() + 2.0 * ds * ds).sqrt()
}

/// Maximum-likelihood isotropic region over a set of positions, pooled over
/// both ground axes and floored at [`SIGMA_MIN`].
pub fn fit_task_region(positions: &[Vec3]) -> Result<GroundGaussian> {
    if positions.is_empty() {
        return Err(Error::EmptySamples("task region needs at least one position"));
    }
    let n = positions.len() as f64;
    let mean = positions.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let spread: f64 = positions.iter().map(|p| (p.xy() - mean.xy()).norm_squared()).sum();
    let sigma = (spread / (2.0 * n)).sqrt().max(SIGMA_MIN);
    Ok(GroundGaussian { mean, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

/// Ground-plane circle of radius `sigma_bound * sigma` around the region mean.
pub fn sigma_bound_circle(region: &GroundGaussian, sigma_bound: f64) -> Result<Circle> {
    if sigma_bound.is_nan() || sigma_bound <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma_bound must be positive, got {sigma_bound}")));
    }
    Ok(Circle { center: region.mean.xy(), radius: sigma_bound * region.sigma })
}

/// `k` evenly spaced boundary points, counter-clockwise from angle 0.
pub fn discretize_circle(circle: &Circle, k: usize) -> Result<Vec<Vec2>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("circle discretization needs k >= 3, got {k}")));
    }
    Ok((0..k)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / k as f64;
            circle.center + circle.radius * Vec2::new(angle.cos(), angle.sin())
        })
        .collect())
}

/// Planar polygon with counter-clockwise vertices. Hulls of degenerate
/// inputs have one (a point) or two (a segment) vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon2D {
    pub vertices: Vec<Vec2>,
}

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl Polygon2D {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Point-in-convex-polygon test. `slack` is a distance in meters that a
    /// point may lie outside an edge and still count as contained.
    pub fn contains(&self, p: &Vec2, slack: f64) -> bool {
        match self.vertices.as_slice() {
            [] => false,
            [v] => (p - v).norm() <= slack,
            [a, b] => distance_to_segment(p, a, b) <= slack,
            vs => vs.iter().zip(vs.iter().cycle().skip(1)).all(|(a, b)| {
                let len = (b - a).norm();
                len == 0.0 || cross(a, b, p) / len >= -slack
            }),
        }
    }

    /// True when every turn is counter-clockwise (or straight within `tol`).
    pub fn is_convex(&self, tol: f64) -> bool {
        let vs = &self.vertices;
        let n = vs.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| cross(&vs[i], &vs[(i + 1) % n], &vs[(i + 2) % n]) >= -tol)
    }

    /// Signed area (positive for counter-clockwise order).
    pub fn area(&self) -> f64 {
        let vs = &self.vertices;
        let n = vs.len();
        if n < 3 {
            return 0.0;
        }
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }
}

fn distance_to_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Andrew's monotone chain. Output is counter-clockwise starting at the
/// lexicographically smallest point, with collinear boundary points removed.
pub fn convex_hull(points: &[Vec2]) -> Result<Polygon2D> {
    if points.is_empty() {
        return Err(Error::EmptySamples("convex hull needs at least one point"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    sorted.dedup();
    if sorted.len() < 3 {
        return Ok(Polygon2D { vertices: sorted });
    }

    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * sorted.len());
    for p in &sorted {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in sorted.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    // last point repeats the first
    hull.pop();
    Ok(Polygon2D { vertices: hull })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn identity_pose_has_zero_yaw() {
        let pose = Pose::new(Vec3::zeros(), Quaternion::identity());
        let aligned = gravity_align(&pose).unwrap();
        assert_eq!(aligned.yaw, 0.0);
        assert_eq!(aligned.position, Vec3::zeros());
    }

    #[test]
    fn pure_yaw_is_kept() {
        let pose = Pose::from_euler(Vec3::new(1.0, 2.0, 1.5), PI / 2.0, 0.0, 0.0);
        let aligned = gravity_align(&pose).unwrap();
        assert!((aligned.yaw - PI / 2.0).abs() < 1e-12);
        assert_eq!(aligned.position, Vec3::new(1.0, 2.0, 1.5));
    }

    #[test]
    fn yaw_then_pitch_matches_hand_rotation() {
        // R = Rz(pi/4) * Ry(0.3); forward = R * e_x by hand.
        let (yaw, pitch) = (PI / 4.0, 0.3f64);
        let rz = Matrix3::new(yaw.cos(), -yaw.sin(), 0.0, yaw.sin(), yaw.cos(), 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(pitch.cos(), 0.0, pitch.sin(), 0.0, 1.0, 0.0, -pitch.sin(), 0.0, pitch.cos());
        let forward = rz * ry * Vec3::x();
        let expected = forward.y.atan2(forward.x);

        let q = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)
            * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), pitch);
        let aligned = gravity_align(&Pose::new(Vec3::zeros(), q.into_inner())).unwrap();
        assert!((aligned.yaw - expected).abs() < 1e-9);
        assert!((aligned.yaw - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn looking_straight_down_uses_up_axis() {
        let pose = Pose::from_euler(Vec3::zeros(), 1.0, PI / 2.0, 0.0);
        let aligned = gravity_align(&pose).unwrap();
        assert!((aligned.yaw - 1.0).abs() < 1e-9, "yaw {}", aligned.yaw);
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let pose = Pose::new(Vec3::zeros(), Quaternion::new(1.0, 0.1, 0.0, 0.0));
        assert!(matches!(gravity_align(&pose), Err(Error::InvalidPose { .. })));
    }

    #[test]
    fn yaw_wraps_to_half_open_interval() {
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rectify_identity_viewer() {
        let r = GroundGaussian::new(Vec3::new(1.0, -2.0, 0.3), 0.2);
        let v = GravityAlignedPose::new(Vec3::zeros(), 0.0);
        assert_eq!(rectify(&r, &v), r);
    }

    #[test]
    fn rectify_hand_example() {
        // R_z(-pi/2) * (0, 2, -0.6) = (2, 0, -0.6)
        let r = GroundGaussian::new(Vec3::new(1.0, 2.0, 0.9), 0.2);
        let v = GravityAlignedPose::new(Vec3::new(1.0, 0.0, 1.5), PI / 2.0);
        let ego = rectify(&r, &v);
        assert!((ego.mean - Vec3::new(2.0, 0.0, -0.6)).norm() < 1e-12);
        assert_eq!(ego.sigma, 0.2);
    }

    #[test]
    fn frechet_trivial_cases() {
        let a = GroundGaussian::new(Vec3::new(0.3, 0.1, 1.0), 0.2);
        assert_eq!(frechet_distance(&a, &a), 0.0);
        let o = GroundGaussian::new(Vec3::zeros(), 0.0);
        let b = GroundGaussian::new(Vec3::new(3.0, 4.0, 0.0), 0.0);
        assert!((frechet_distance(&o, &b) - 5.0).abs() < 1e-12);
    }

    /// General 2-Wasserstein formula for Gaussians, evaluated with
    /// eigendecompositions for the matrix square roots.
    fn wasserstein_matrix_oracle(a: &GroundGaussian, b: &GroundGaussian) -> f64 {
        fn sqrtm(m: nalgebra::Matrix2<f64>) -> nalgebra::Matrix2<f64> {
            let eig = SymmetricEigen::new(m);
            let d = nalgebra::Matrix2::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
            eig.eigenvectors * d * eig.eigenvectors.transpose()
        }
        let (s1, s2) = (a.covariance_xy(), b.covariance_xy());
        let r1 = sqrtm(s1);
        let cross = sqrtm(r1 * s2 * r1);
        let trace = (s1 + s2 - 2.0 * cross).trace();
        ((a.mean - b.mean).norm_squared() + trace).sqrt()
    }

    #[test]
    fn frechet_equal_means_matches_matrix_formula() {
        let a = GroundGaussian::new(Vec3::zeros(), 0.1);
        let b = GroundGaussian::new(Vec3::zeros(), 0.3);
        let oracle = wasserstein_matrix_oracle(&a, &b);
        assert!((oracle - 0.282_842_7).abs() < 1e-7);
        assert!((frechet_distance(&a, &b) - oracle).abs() < 1e-12);
    }

    #[test]
    fn fit_single_point_clamps() {
        let r = fit_task_region(&[Vec3::new(1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(r.mean, Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(r.sigma, SIGMA_MIN);
    }

    #[test]
    fn fit_cross_pattern() {
        let pts =
            [Vec3::new(0.2, 0.0, 0.0), Vec3::new(-0.2, 0.0, 0.0), Vec3::new(0.0, 0.2, 0.0), Vec3::new(0.0, -0.2, 0.0)];
        // brute force: sum of squared xy deviations / (2n)
        let mut ss = 0.0;
        for p in &pts {
            ss += p.x * p.x + p.y * p.y;
        }
        let expected = (ss / 8.0).sqrt();
        let r = fit_task_region(&pts).unwrap();
        assert!(r.mean.norm() < 1e-15);
        assert!((r.sigma - expected).abs() < 1e-15);
        assert!((r.sigma - 0.141_42).abs() < 1e-5);
    }

    #[test]
    fn fit_identical_points_and_empty() {
        let p = Vec3::new(2.0, 3.0, 1.6);
        assert_eq!(fit_task_region(&[p; 5]).unwrap().sigma, SIGMA_MIN);
        assert!(matches!(fit_task_region(&[]), Err(Error::EmptySamples(_))));
    }

    #[test]
    fn circle_radius_and_errors() {
        let r = GroundGaussian::new(Vec3::new(1.0, 2.0, 3.0), 0.2);
        let c = sigma_bound_circle(&r, 2.0).unwrap();
        assert_eq!(c.center, Vec2::new(1.0, 2.0));
        assert!((c.radius - 0.4).abs() < 1e-15);
        let r = GroundGaussian::new(Vec3::zeros(), 0.3);
        assert!((sigma_bound_circle(&r, 3.0).unwrap().radius - 0.9).abs() < 1e-15);
        let r = GroundGaussian::new(Vec3::zeros(), SIGMA_MIN);
        assert_eq!(sigma_bound_circle(&r, 1.0).unwrap().radius, 0.05);
        assert!(sigma_bound_circle(&r, 0.0).is_err());
        assert!(sigma_bound_circle(&r, -1.0).is_err());
    }

    #[test]
    fn discretize_axis_points() {
        let c = Circle { center: Vec2::zeros(), radius: 1.0 };
        let pts = discretize_circle(&c, 4).unwrap();
        let expected = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)];
        for (p, e) in pts.iter().zip(&expected) {
            assert!((p - e).norm() < 1e-15);
        }
        assert!(discretize_circle(&c, 2).is_err());
    }

    #[test]
    fn discretize_degenerate_and_norms() {
        let c = Circle { center: Vec2::new(0.5, -1.0), radius: 0.0 };
        assert!(discretize_circle(&c, 7).unwrap().iter().all(|p| *p == c.center));
        let c = Circle { center: Vec2::new(0.5, -1.0), radius: 0.5 };
        let pts = discretize_circle(&c, 16).unwrap();
        assert_eq!(pts.len(), 16);
        for p in pts {
            assert!(((p - c.center).norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn hull_drops_interior_point() {
        let pts =
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0), Vec2::new(0.5, 0.5)];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices, pts[..4].to_vec());
        assert!((hull.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hull_degenerate_inputs() {
        let seg = convex_hull(&[Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0)]).unwrap();
        assert_eq!(seg.vertices, vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0)]);
        let one = convex_hull(&[Vec2::new(3.0, 1.0); 4]).unwrap();
        assert_eq!(one.vertices, vec![Vec2::new(3.0, 1.0)]);
        assert!(matches!(convex_hull(&[]), Err(Error::EmptySamples(_))));
    }

    /// A point is a hull vertex iff some line through it has every other
    /// point strictly on one side; checked via all ordered triples.
    fn brute_force_extreme_points(points: &[Vec2]) -> Vec<usize> {
        let n = points.len();
        (0..n)
            .filter(|&i| {
                // i is not extreme if it lies inside (or on an edge of) a
                // triangle of other points
                !(0..n).any(|a| {
                    (0..n).any(|b| {
                        (0..n).any(|c| {
                            if a == i || b == i || c == i || a == b || b == c || a == c {
                                return false;
                            }
                            let (pa, pb, pc, p) = (points[a], points[b], points[c], points[i]);
                            let orient = cross(&pa, &pb, &pc);
                            if orient.abs() < 1e-15 {
                                return false;
                            }
                            let s = orient.signum();
                            s * cross(&pa, &pb, &p) >= 0.0
                                && s * cross(&pb, &pc, &p) >= 0.0
                                && s * cross(&pc, &pa, &p) >= 0.0
                        })
                    })
                })
            })
            .collect()
    }

    #[test]
    fn hull_of_circle_points_keeps_all_in_ccw_order() {
        let c = Circle { center: Vec2::new(0.2, 0.1), radius: 1.0 };
        let pts = discretize_circle(&c, 16).unwrap();
        let extreme = brute_force_extreme_points(&pts);
        assert_eq!(extreme.len(), 16);
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 16);
        assert!(hull.area() > 0.0);
        assert!(hull.is_convex(0.0));
        for p in &pts {
            assert!(hull.vertices.contains(p));
        }
    }

    fn region() -> impl Strategy<Value = GroundGaussian> {
        (-5.0..5.0f64, -5.0..5.0f64, -2.0..2.0f64, 0.0..1.0f64)
            .prop_map(|(x, y, z, s)| GroundGaussian::new(Vec3::new(x, y, z), s))
    }

    fn viewer() -> impl Strategy<Value = GravityAlignedPose> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.0..2.0f64, -PI..PI)
            .prop_map(|(x, y, z, yaw)| GravityAlignedPose::new(Vec3::new(x, y, z), yaw))
    }

    proptest! {
        #[test]
        fn frechet_is_symmetric_and_matches_oracle(a in region(), b in region()) {
            prop_assert_eq!(frechet_distance(&a, &b), frechet_distance(&b, &a));
            prop_assert!((frechet_distance(&a, &b) - wasserstein_matrix_oracle(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn frechet_triangle_inequality(a in region(), b in region(), c in region()) {
            prop_assert!(frechet_distance(&a, &c)
                <= frechet_distance(&a, &b) + frechet_distance(&b, &c) + 1e-9);
        }

        #[test]
        fn rectify_preserves_distance(a in region(), b in region(), v in viewer()) {
            let d = frechet_distance(&rectify(&a, &v), &rectify(&b, &v));
            prop_assert!((d - frechet_distance(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn rectify_inverts(r in region(), v in viewer()) {
            let back = rectify(&unrectify(&r, &v), &v);
            prop_assert!((back.mean - r.mean).norm() < 1e-9);
            prop_assert_eq!(back.sigma, r.sigma);
        }

        #[test]
        fn zero_pitch_roll_roundtrip_keeps_heading(yaw in -PI..PI) {
            let pose = Pose::from_euler(Vec3::zeros(), yaw, 0.0, 0.0);
            let aligned = gravity_align(&pose).unwrap();
            prop_assert!(wrap_angle(aligned.yaw - yaw).abs() < 1e-9);
        }

        #[test]
        fn hull_contains_inputs_and_is_convex(
            pts in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..60)
        ) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let hull = convex_hull(&pts).unwrap();
            prop_assert!(hull.is_convex(1e-12));
            for p in &pts {
                prop_assert!(hull.contains(p, 1e-12));
            }
            for w in hull.vertices.windows(2) {
                prop_assert!(w[0] != w[1]);
            }
        }
    }
}
