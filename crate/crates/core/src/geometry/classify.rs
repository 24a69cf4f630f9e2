//! Point labelling against element enclosures, and the two spatial-utilization metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{Frame, PointCloud};
use super::enclosure::Enclosure;
use super::GeometryError;

/// Count key used for points outside every enclosure.
pub const TEMPORARY: &str = "TEMPORARY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointLabel {
    /// Index into [`ClassificationResult::element_ids`].
    Element(usize),
    Temporary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub element_ids: Vec<String>,
    pub labels: Vec<PointLabel>,
    /// Every element id plus [`TEMPORARY`], zero counts included.
    pub counts: BTreeMap<String, usize>,
}

impl ClassificationResult {
    pub fn count(&self, label: &str) -> usize {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn temporary_count(&self) -> usize {
        self.count(TEMPORARY)
    }

    pub fn label_name(&self, label: PointLabel) -> &str {
        match label {
            PointLabel::Element(i) => &self.element_ids[i],
            PointLabel::Temporary => TEMPORARY,
        }
    }
}

/// Labels every point with the enclosure that contains it, or [`PointLabel::Temporary`].
///
/// When several enclosures contain a point, the one with the smallest volume wins, with
/// ties broken by lexicographic element id.
pub fn classify_points(
    cloud: &PointCloud,
    enclosures: &[Enclosure],
) -> Result<ClassificationResult, GeometryError> {
    if cloud.frame != Frame::Bim {
        return Err(GeometryError::WrongFrame);
    }
    let mut seen = HashSet::new();
    for e in enclosures {
        if e.element_id == TEMPORARY {
            return Err(GeometryError::ReservedElementId);
        }
        if !seen.insert(e.element_id.as_str()) {
            return Err(GeometryError::DuplicateElement(e.element_id.clone()));
        }
    }

    let mut order: Vec<usize> = (0..enclosures.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&enclosures[a], &enclosures[b]);
        match ea.volume.total_cmp(&eb.volume) {
            Ordering::Equal => ea.element_id.cmp(&eb.element_id),
            o => o,
        }
    });

    let labels: Vec<PointLabel> = cloud
        .points
        .par_iter()
        .map(|p| {
            order
                .iter()
                .find(|&&i| enclosures[i].contains(p))
                .map_or(PointLabel::Temporary, |&i| PointLabel::Element(i))
        })
        .collect();

    let element_ids: Vec<String> = enclosures.iter().map(|e| e.element_id.clone()).collect();
    let mut per_index = vec![0usize; enclosures.len()];
    let mut temporary = 0usize;
    for l in &labels {
        match l {
            PointLabel::Element(i) => per_index[*i] += 1,
            PointLabel::Temporary => temporary += 1,
        }
    }
    let mut counts: BTreeMap<String, usize> = element_ids
        .iter()
        .cloned()
        .zip(per_index)
        .collect();
    counts.insert(TEMPORARY.to_string(), temporary);

    Ok(ClassificationResult {
        element_ids,
        labels,
        counts,
    })
}

/// Utilization extent and closeness of one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMetrics {
    pub capture_date: NaiveDate,
    /// Mean position of temporary points; `None` when there are none.
    pub closeness: Option<[f64; 3]>,
    pub utilization_extent: f64,
    pub n_temp: usize,
    pub n_floor: usize,
}

pub fn compute_spatial_metrics(
    result: &ClassificationResult,
    cloud: &PointCloud,
    floor_element_id: &str,
    capture_date: NaiveDate,
) -> Result<SpatialMetrics, GeometryError> {
    if !result.element_ids.iter().any(|id| id == floor_element_id) {
        return Err(GeometryError::UnknownFloor(floor_element_id.to_string()));
    }
    if result.labels.len() != cloud.len() {
        return Err(GeometryError::LabelCountMismatch {
            labels: result.labels.len(),
            points: cloud.len(),
        });
    }
    let n_temp = result.temporary_count();
    let n_floor = result.count(floor_element_id);
    if n_temp + n_floor == 0 {
        return Err(GeometryError::NoFloorOrTempPoints);
    }

    let closeness = if n_temp == 0 {
        None
    } else {
        let mut sum = [0.0f64; 3];
        for (p, l) in cloud.points.iter().zip(&result.labels) {
            if *l == PointLabel::Temporary {
                sum[0] += p.x;
                sum[1] += p.y;
                sum[2] += p.z;
            }
        }
        let n = n_temp as f64;
        Some([sum[0] / n, sum[1] / n, sum[2] / n])
    };

    Ok(SpatialMetrics {
        capture_date,
        closeness,
        utilization_extent: n_temp as f64 / (n_temp + n_floor) as f64,
        n_temp,
        n_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_enclosure, Point3};

    fn cube(x0: f64, y0: f64, z0: f64, s: f64) -> Vec<Point3> {
        let mut v = Vec::new();
        for dx in [0.0, s] {
            for dy in [0.0, s] {
                for dz in [0.0, s] {
                    v.push(Point3::new(x0 + dx, y0 + dy, z0 + dz));
                }
            }
        }
        v
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 2, 2).unwrap()
    }

    #[test]
    fn single_point_inside() {
        let e = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "wall", 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5)], Frame::Bim);
        let r = classify_points(&cloud, &[e]).unwrap();
        assert_eq!(r.count("wall"), 1);
        assert_eq!(r.temporary_count(), 0);
        assert_eq!(r.labels, vec![PointLabel::Element(0)]);
    }

    #[test]
    fn single_point_outside() {
        let e = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "wall", 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(3.0, 0.5, 0.5)], Frame::Bim);
        let r = classify_points(&cloud, &[e]).unwrap();
        assert_eq!(r.temporary_count(), 1);
        assert_eq!(r.label_name(r.labels[0]), TEMPORARY);
    }

    #[test]
    fn scanner_frame_rejected() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)], Frame::Scanner);
        assert!(matches!(
            classify_points(&cloud, &[]),
            Err(GeometryError::WrongFrame)
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "a", 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)], Frame::Bim);
        assert!(matches!(
            classify_points(&cloud, &[e.clone(), e]),
            Err(GeometryError::DuplicateElement(_))
        ));
    }

    #[test]
    fn overlap_resolved_by_volume_then_id() {
        let big = build_enclosure(&cube(0.0, 0.0, 0.0, 2.0), "a_big", 0.0).unwrap();
        let small = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "z_small", 0.0).unwrap();
        let twin = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "m_small", 0.0).unwrap();
        let cloud = PointCloud::new(
            vec![Point3::new(0.5, 0.5, 0.5), Point3::new(1.5, 1.5, 1.5)],
            Frame::Bim,
        );
        let r = classify_points(&cloud, &[big.clone(), small.clone()]).unwrap();
        assert_eq!(r.label_name(r.labels[0]), "z_small");
        assert_eq!(r.label_name(r.labels[1]), "a_big");
        let r = classify_points(&cloud, &[small, big, twin]).unwrap();
        assert_eq!(r.label_name(r.labels[0]), "m_small");
    }

    #[test]
    fn metrics_from_counts_and_mean() {
        // 70 floor points, 30 temporary points symmetric about (2, 3, 0.5)
        let floor = build_enclosure(&cube(0.0, 0.0, -1.0, 1.0), "floor", 0.0).unwrap();
        let mut pts: Vec<Point3> = (0..70)
            .map(|i| Point3::new(0.01 * i as f64, 0.5, -0.5))
            .collect();
        for i in 0..15 {
            let d = 0.1 * (i as f64 + 1.0);
            pts.push(Point3::new(2.0 + d, 3.0 - d, 0.5 + 0.2));
            pts.push(Point3::new(2.0 - d, 3.0 + d, 0.5 - 0.2));
        }
        let cloud = PointCloud::new(pts, Frame::Bim);
        let r = classify_points(&cloud, &[floor]).unwrap();
        let m = compute_spatial_metrics(&r, &cloud, "floor", date()).unwrap();
        assert_eq!((m.n_temp, m.n_floor), (30, 70));
        assert!((m.utilization_extent - 0.30).abs() < 1e-15);
        let c = m.closeness.unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 3.0).abs() < 1e-12);
        assert!((c[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_temporary_points_gives_absent_closeness() {
        let floor = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "floor", 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5)], Frame::Bim);
        let r = classify_points(&cloud, &[floor]).unwrap();
        let m = compute_spatial_metrics(&r, &cloud, "floor", date()).unwrap();
        assert_eq!(m.utilization_extent, 0.0);
        assert!(m.closeness.is_none());
    }

    #[test]
    fn zero_denominator_and_unknown_floor() {
        let floor = build_enclosure(&cube(0.0, 0.0, 0.0, 1.0), "floor", 0.0).unwrap();
        let wall = build_enclosure(&cube(5.0, 0.0, 0.0, 1.0), "wall", 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(5.5, 0.5, 0.5)], Frame::Bim);
        let r = classify_points(&cloud, &[floor, wall]).unwrap();
        assert!(matches!(
            compute_spatial_metrics(&r, &cloud, "floor", date()),
            Err(GeometryError::NoFloorOrTempPoints)
        ));
        assert!(matches!(
            compute_spatial_metrics(&r, &cloud, "slab", date()),
            Err(GeometryError::UnknownFloor(_))
        ));
    }
}
