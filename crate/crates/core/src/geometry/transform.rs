//! Rigid transforms and closed-form least-squares registration.

use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};

use super::cloud::{Frame, Point3, PointCloud};
use super::GeometryError;

/// Tolerance on `RᵀR − I` and `det R − 1`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Ratio of second to first singular value of a centered point set below which the set is
/// treated as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Row-major wire form used in config and JSON files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformRepr {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = GeometryError;

    fn try_from(r: TransformRepr) -> Result<Self, Self::Error> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::new(m, Vector3::from(r.translation))
    }
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        TransformRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let err = orthonormality_error(&rotation);
        let det = rotation.determinant();
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite())
            || err >= ORTHONORMAL_TOL
            || (det - 1.0).abs() >= ORTHONORMAL_TOL
        {
            return Err(GeometryError::NotOrthonormal {
                max_error: err.max((det - 1.0).abs()),
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }
}

/// Maps every point into the BIM frame.
pub fn apply_rigid_transform(
    cloud: &PointCloud,
    transform: &RigidTransform,
) -> Result<PointCloud, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    // A transform deserialized elsewhere may have drifted; re-check the invariant.
    RigidTransform::new(transform.rotation, transform.translation)?;
    Ok(PointCloud {
        points: cloud.points.iter().map(|p| transform.apply(p)).collect(),
        capture_date: cloud.capture_date,
        frame: Frame::Bim,
    })
}

fn centroid(points: &[Point3]) -> Vector3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.to_vector());
    sum / points.len() as f64
}

fn check_spread(points: &[Point3], mean: &Vector3<f64>) -> Result<(), GeometryError> {
    let mut scatter = Matrix3::zeros();
    for p in points {
        let c = p.to_vector() - mean;
        scatter += c * c.transpose();
    }
    // Singular values of the scatter matrix are the squares of the data matrix ones.
    let mut sv: Vec<f64> = scatter
        .singular_values()
        .iter()
        .map(|s| s.max(0.0).sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] == 0.0 || sv[1] <= COLLINEAR_TOL * sv[0] {
        return Err(GeometryError::DegenerateCorrespondences);
    }
    Ok(())
}

/// Least-squares rigid alignment of `src` onto `dst` (Kabsch, reflection-corrected).
pub fn estimate_rigid_transform(
    src: &[Point3],
    dst: &[Point3],
) -> Result<RigidTransform, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::CorrespondenceMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(GeometryError::TooFewCorrespondences(src.len()));
    }
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    check_spread(src, &mu_s)?;
    check_spread(dst, &mu_d)?;

    // Cross-covariance H = Σ (s − μs)(d − μd)ᵀ
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.to_vector() - mu_s) * (d.to_vector() - mu_d).transpose();
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u.ok_or(GeometryError::DegenerateCorrespondences)?;
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateCorrespondences)?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    let translation = mu_d - rotation * mu_s;
    RigidTransform::new(rotation, translation)
}

/// Root-mean-square distance between `transform(src[i])` and `dst[i]`.
pub fn rms_residual(transform: &RigidTransform, src: &[Point3], dst: &[Point3]) -> f64 {
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (transform.apply(s).to_vector() - d.to_vector()).norm_squared())
        .sum();
    (sum / src.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = Vector3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        RigidTransform::from_axis_angle(axis, rng.random_range(-3.1..3.1), t)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect()
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)], Frame::Scanner);
        let out = apply_rigid_transform(&cloud, &RigidTransform::identity()).unwrap();
        assert_eq!(out.points, cloud.points);
        assert_eq!(out.frame, Frame::Bim);
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, Vector3::zeros());
        let p = t.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((p.x).abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15 && p.z.abs() < 1e-15);
    }

    #[test]
    fn inverse_composition_restores_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = random_transform(&mut rng);
            let cloud = PointCloud::new(random_points(&mut rng, 50), Frame::Scanner);
            let there = apply_rigid_transform(&cloud, &t).unwrap();
            let back = apply_rigid_transform(&there, &t.inverse()).unwrap();
            for (a, b) in cloud.points.iter().zip(&back.points) {
                assert!((a.x - b.x).abs() < 1e-12);
                assert!((a.y - b.y).abs() < 1e-12);
                assert!((a.z - b.z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
        // reflection
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn empty_cloud_rejected() {
        let cloud = PointCloud::new(vec![], Frame::Scanner);
        assert!(matches!(
            apply_rigid_transform(&cloud, &RigidTransform::identity()),
            Err(GeometryError::EmptyCloud)
        ));
    }

    #[test]
    fn estimate_identity_for_equal_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 10);
        let t = estimate_rigid_transform(&pts, &pts).unwrap();
        assert!((t.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(t.translation().norm() < 1e-12);
    }

    #[test]
    fn estimate_recovers_known_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let truth = random_transform(&mut rng);
        let src = random_points(&mut rng, 10);
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply(p)).collect();
        let est = estimate_rigid_transform(&src, &dst).unwrap();
        assert!(rms_residual(&est, &src, &dst) < 1e-9);
        assert!((est.rotation() - truth.rotation()).abs().max() < 1e-9);
    }

    #[test]
    fn three_non_collinear_points_suffice() {
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
        ];
        let truth = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, 0.5),
            0.7,
            Vector3::new(3.0, -1.0, 2.0),
        );
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply(p)).collect();
        let est = estimate_rigid_transform(&src, &dst).unwrap();
        assert!(est.rotation().determinant() > 0.0);
        assert!(rms_residual(&est, &src, &dst) < 1e-9);
    }

    #[test]
    fn collinear_triple_is_degenerate() {
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(2.0, 2.0, 2.0),
        ];
        assert!(matches!(
            estimate_rigid_transform(&src, &src),
            Err(GeometryError::DegenerateCorrespondences)
        ));
    }

    #[test]
    fn too_few_or_mismatched() {
        let p = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            estimate_rigid_transform(&p, &p),
            Err(GeometryError::TooFewCorrespondences(2))
        ));
        let q = vec![Point3::new(0.0, 0.0, 0.0); 3];
        assert!(matches!(
            estimate_rigid_transform(&p, &q),
            Err(GeometryError::CorrespondenceMismatch { .. })
        ));
    }

    #[test]
    fn serde_round_trip_validates() {
        let t = RigidTransform::from_axis_angle(Vector3::x(), 0.3, Vector3::new(1.0, 2.0, 3.0));
        let json = serde_json::to_string(&t).unwrap();
        let back: RigidTransform = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"rotation":[[2,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}"#;
        assert!(serde_json::from_str::<RigidTransform>(bad).is_err());
    }
}
