//! Incremental 3D convex hull and its half-space representation.

use std::collections::HashSet;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::cloud::Point3;
use super::GeometryError;

/// `{p : normal·p ≤ offset}` with a unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl HalfSpace {
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z - self.offset
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.signed_distance(p) <= 0.0
    }

    fn normal_vec(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }
}

#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub points: Vec<Point3>,
    /// Triangles with outward (counter-clockwise seen from outside) winding.
    pub faces: Vec<[usize; 3]>,
}

fn scale_eps(points: &[Point3]) -> f64 {
    let extent = points
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()])
        .fold(0.0_f64, f64::max);
    1e-10 * extent.max(1.0)
}

fn plane_of(points: &[Point3], f: &[usize; 3]) -> (Vector3<f64>, f64) {
    let a = points[f[0]].to_vector();
    let b = points[f[1]].to_vector();
    let c = points[f[2]].to_vector();
    let n = (b - a).cross(&(c - a));
    let norm = n.norm();
    let n = if norm > 0.0 { n / norm } else { n };
    (n, n.dot(&a))
}

fn farthest_by<F: Fn(&Point3) -> f64>(points: &[Point3], f: F) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, f(p)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

impl ConvexHull {
    /// Builds the hull. Fails with [`GeometryError::DegenerateVertices`] when the points do not
    /// span three dimensions.
    pub fn build(points: &[Point3]) -> Result<Self, GeometryError> {
        if points.len() < 4 {
            return Err(GeometryError::DegenerateVertices);
        }
        if !points.iter().all(Point3::is_finite) {
            return Err(GeometryError::NonFinite);
        }
        let eps = scale_eps(points);
        let v = |i: usize| points[i].to_vector();

        let i0 = 0;
        let (i1, d1) = farthest_by(points, |p| (p.to_vector() - v(i0)).norm());
        if d1 <= eps {
            return Err(GeometryError::DegenerateVertices);
        }
        let dir = (v(i1) - v(i0)) / d1;
        let (i2, d2) = farthest_by(points, |p| {
            let w = p.to_vector() - v(i0);
            (w - dir * w.dot(&dir)).norm()
        });
        if d2 <= eps {
            return Err(GeometryError::DegenerateVertices);
        }
        let n = (v(i1) - v(i0)).cross(&(v(i2) - v(i0))).normalize();
        let (i3, d3) = farthest_by(points, |p| (p.to_vector() - v(i0)).dot(&n).abs());
        if d3 <= eps {
            return Err(GeometryError::DegenerateVertices);
        }

        let interior = (v(i0) + v(i1) + v(i2) + v(i3)) / 4.0;
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for f in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
            let (n, off) = plane_of(points, &f);
            if n.dot(&interior) - off > 0.0 {
                faces.push([f[0], f[2], f[1]]);
            } else {
                faces.push(f);
            }
        }

        let seed = [i0, i1, i2, i3];
        for (idx, p) in points.iter().enumerate() {
            if seed.contains(&idx) {
                continue;
            }
            let pv = p.to_vector();
            let visible: Vec<bool> = faces
                .iter()
                .map(|f| {
                    let (n, off) = plane_of(points, f);
                    n.dot(&pv) - off > eps
                })
                .collect();
            if !visible.iter().any(|&b| b) {
                continue;
            }
            let mut edges: HashSet<(usize, usize)> = HashSet::new();
            for (f, _) in faces.iter().zip(&visible).filter(|(_, &vis)| vis) {
                edges.insert((f[0], f[1]));
                edges.insert((f[1], f[2]));
                edges.insert((f[2], f[0]));
            }
            let mut next: Vec<[usize; 3]> = Vec::with_capacity(faces.len() + 4);
            let mut horizon: Vec<(usize, usize)> = Vec::new();
            for (f, vis) in faces.iter().zip(&visible) {
                if !vis {
                    next.push(*f);
                    continue;
                }
                for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                    if !edges.contains(&(b, a)) {
                        horizon.push((a, b));
                    }
                }
            }
            for (a, b) in horizon {
                next.push([a, b, idx]);
            }
            faces = next;
        }

        Ok(Self {
            points: points.to_vec(),
            faces,
        })
    }

    /// Facet planes with coplanar triangles merged.
    pub fn half_spaces(&self) -> Vec<HalfSpace> {
        let eps = scale_eps(&self.points);
        let mut out: Vec<HalfSpace> = Vec::new();
        for f in &self.faces {
            let (n, off) = plane_of(&self.points, f);
            let dup = out.iter().any(|h| {
                h.normal_vec().dot(&n) > 1.0 - 1e-9 && (h.offset - off).abs() <= eps
            });
            if !dup {
                out.push(HalfSpace {
                    normal: [n.x, n.y, n.z],
                    offset: off,
                });
            }
        }
        out
    }

    pub fn volume(&self) -> f64 {
        let o = self.points[self.faces[0][0]].to_vector();
        self.faces
            .iter()
            .map(|f| {
                let a = self.points[f[0]].to_vector() - o;
                let b = self.points[f[1]].to_vector() - o;
                let c = self.points[f[2]].to_vector() - o;
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

/// Vertices of the bounded polytope `∩ halfspaces`, found by intersecting every plane triple.
pub fn polytope_vertices(half_spaces: &[HalfSpace]) -> Vec<Point3> {
    let scale = half_spaces
        .iter()
        .map(|h| h.offset.abs())
        .fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;
    let mut out: Vec<Point3> = Vec::new();
    let n = half_spaces.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (&half_spaces[i], &half_spaces[j], &half_spaces[k]);
                let m = Matrix3::from_rows(&[
                    a.normal_vec().transpose(),
                    b.normal_vec().transpose(),
                    c.normal_vec().transpose(),
                ]);
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let Some(inv) = m.try_inverse() else { continue };
                let x = inv * Vector3::new(a.offset, b.offset, c.offset);
                let p = Point3::from_vector(&x);
                if half_spaces.iter().all(|h| h.signed_distance(&p) <= tol)
                    && !out.iter().any(|q| q.distance(&p) <= tol)
                {
                    out.push(p);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn cube_has_six_planes_and_unit_volume() {
        let hull = ConvexHull::build(&unit_cube()).unwrap();
        assert_eq!(hull.half_spaces().len(), 6);
        assert!((hull.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_with_interior_points() {
        let mut pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.1, 0.1, 0.1),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.2, 0.2, 0.2),
            Point3::new(0.0, 0.0, 1.0),
        ];
        pts.push(Point3::new(0.05, 0.05, 0.05));
        let hull = ConvexHull::build(&pts).unwrap();
        assert_eq!(hull.faces.len(), 4);
        assert!((hull.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        assert!(matches!(
            ConvexHull::build(&pts),
            Err(GeometryError::DegenerateVertices)
        ));
    }

    #[test]
    fn polytope_vertices_of_inflated_cube() {
        let hull = ConvexHull::build(&unit_cube()).unwrap();
        let inflated: Vec<HalfSpace> = hull
            .half_spaces()
            .into_iter()
            .map(|h| HalfSpace {
                offset: h.offset + 0.5,
                ..h
            })
            .collect();
        let verts = polytope_vertices(&inflated);
        assert_eq!(verts.len(), 8);
        let vol = ConvexHull::build(&verts).unwrap().volume();
        assert!((vol - 8.0).abs() < 1e-9);
    }
}
