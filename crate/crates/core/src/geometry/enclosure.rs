//! Containment volumes built from BIM element corner vertices.

use serde::{Deserialize, Serialize};

use super::cloud::Point3;
use super::hull::{polytope_vertices, ConvexHull, HalfSpace};
use super::GeometryError;

/// Default outward allowance in meters.
pub const DEFAULT_ALLOWANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnclosureShape {
    ConvexHull,
    /// Coplanar vertex sets fall back to their inflated axis-aligned bounding box.
    BoundingBox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Enclosure {
    pub element_id: String,
    /// Planes already shifted outward by `allowance`.
    pub half_spaces: Vec<HalfSpace>,
    pub allowance: f64,
    pub source_vertices: Vec<Point3>,
    pub shape: EnclosureShape,
    /// Volume of the inflated region, used to resolve overlapping enclosures.
    pub volume: f64,
}

impl Enclosure {
    /// Point membership; boundary points count as inside.
    pub fn contains(&self, p: &Point3) -> bool {
        self.half_spaces
            .iter()
            .all(|h| h.signed_distance(p) <= 1e-9 * h.offset.abs().max(1.0))
    }
}

fn bounding_box(
    vertices: &[Point3],
    allowance: f64,
) -> Result<(Vec<HalfSpace>, f64), GeometryError> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for (k, c) in [v.x, v.y, v.z].into_iter().enumerate() {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    let mut volume = 1.0;
    let mut planes = Vec::with_capacity(6);
    for k in 0..3 {
        let extent = hi[k] - lo[k] + 2.0 * allowance;
        if extent <= 0.0 {
            return Err(GeometryError::DegenerateVertices);
        }
        volume *= extent;
        let mut n = [0.0; 3];
        n[k] = 1.0;
        planes.push(HalfSpace {
            normal: n,
            offset: hi[k] + allowance,
        });
        n[k] = -1.0;
        planes.push(HalfSpace {
            normal: n,
            offset: -lo[k] + allowance,
        });
    }
    Ok((planes, volume))
}

pub fn build_enclosure(
    vertices: &[Point3],
    element_id: impl Into<String>,
    allowance: f64,
) -> Result<Enclosure, GeometryError> {
    let element_id = element_id.into();
    if !(allowance >= 0.0 && allowance.is_finite()) {
        return Err(GeometryError::InvalidAllowance(allowance));
    }
    if vertices.len() < 4 {
        return Err(GeometryError::DegenerateVertices);
    }
    if !vertices.iter().all(Point3::is_finite) {
        return Err(GeometryError::NonFinite);
    }

    let (half_spaces, shape, volume) = match ConvexHull::build(vertices) {
        Ok(hull) => {
            let planes: Vec<HalfSpace> = hull
                .half_spaces()
                .into_iter()
                .map(|h| HalfSpace {
                    normal: h.normal,
                    offset: h.offset + allowance,
                })
                .collect();
            let volume = if allowance == 0.0 {
                hull.volume()
            } else {
                ConvexHull::build(&polytope_vertices(&planes))?.volume()
            };
            (planes, EnclosureShape::ConvexHull, volume)
        }
        Err(GeometryError::DegenerateVertices) => {
            let (planes, volume) = bounding_box(vertices, allowance)?;
            (planes, EnclosureShape::BoundingBox, volume)
        }
        Err(e) => return Err(e),
    };

    Ok(Enclosure {
        element_id,
        half_spaces,
        allowance,
        source_vertices: vertices.to_vec(),
        shape,
        volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> Vec<Point3> {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push(Point3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn unit_cube_no_allowance() {
        let e = build_enclosure(&unit_cube(), "c", 0.0).unwrap();
        assert_eq!(e.half_spaces.len(), 6);
        assert_eq!(e.shape, EnclosureShape::ConvexHull);
        assert!(e.contains(&Point3::new(0.5, 0.5, 0.5)));
        assert!(!e.contains(&Point3::new(1.5, 0.5, 0.5)));
        assert!((e.volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_cube_with_allowance() {
        let e = build_enclosure(&unit_cube(), "c", 0.1).unwrap();
        assert!(e.contains(&Point3::new(1.05, 0.5, 0.5)));
        assert!(!e.contains(&Point3::new(1.15, 0.5, 0.5)));
        assert!((e.volume - 1.2_f64.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn every_source_vertex_is_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let pts: Vec<Point3> = (0..15)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    )
                })
                .collect();
            for allowance in [0.0, 0.02] {
                let e = build_enclosure(&pts, "r", allowance).unwrap();
                assert!(e.half_spaces.len() >= 4);
                assert!(pts.iter().all(|p| e.contains(p)));
            }
        }
    }

    #[test]
    fn coplanar_falls_back_to_box() {
        let slab = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(4.0, 0.0, 0.0),
            Point3::new(0.0, 3.0, 0.0),
            Point3::new(4.0, 3.0, 0.0),
        ];
        let e = build_enclosure(&slab, "floor", 0.02).unwrap();
        assert_eq!(e.shape, EnclosureShape::BoundingBox);
        assert!(e.contains(&Point3::new(2.0, 1.0, 0.01)));
        assert!(!e.contains(&Point3::new(2.0, 1.0, 0.03)));
        assert!((e.volume - 4.04 * 3.04 * 0.04).abs() < 1e-12);
        // no allowance → even the fallback has zero thickness
        assert!(matches!(
            build_enclosure(&slab, "floor", 0.0),
            Err(GeometryError::DegenerateVertices)
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_enclosure(&unit_cube(), "c", -0.1).is_err());
        assert!(build_enclosure(&unit_cube()[..3], "c", 0.1).is_err());
    }

    #[test]
    fn membership_monotone_in_allowance() {
        let probe = [
            Point3::new(1.03, 0.5, 0.5),
            Point3::new(1.07, 1.07, 0.5),
            Point3::new(-0.01, -0.01, -0.01),
        ];
        let allowances = [0.0, 0.02, 0.05, 0.08, 0.2];
        for p in &probe {
            let mut was_inside = false;
            for a in allowances {
                let inside = build_enclosure(&unit_cube(), "c", a).unwrap().contains(p);
                assert!(!was_inside || inside);
                was_inside = inside;
            }
        }
    }
}
