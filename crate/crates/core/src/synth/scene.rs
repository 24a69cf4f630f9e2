//! Room scenes with known labels: a floor slab, one wall and box-shaped temporary objects.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::bim::{BimElement, ElementKind};
use crate::geometry::{Frame, Point3, PointCloud, RigidTransform, SpatialMetrics};

pub const SCENE_FLOOR_ID: &str = "floor";
pub const SCENE_WALL_ID: &str = "wall";
/// Gap kept between temporary objects and the floor/wall surfaces. Enclosure allowances
/// below this keep every sampled point unambiguous.
pub const SCENE_CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub points: usize,
}

impl ObstacleBox {
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let lo = std::array::from_fn(|k| self.center[k] - self.dims[k] / 2.0);
        let hi = std::array::from_fn(|k| self.center[k] + self.dims[k] / 2.0);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    /// Room length (x), depth (y) and wall height (z) in meters. The floor slab spans
    /// `[0, x] × [0, y]` below `z = 0`; the wall stands on the far side `y = depth`.
    pub room: [f64; 3],
    /// Floor points per square meter of room footprint.
    pub floor_density: f64,
    /// Wall points per square meter of wall face.
    pub wall_density: f64,
    pub slab_thickness: f64,
    pub wall_thickness: f64,
    pub obstacles: Vec<ObstacleBox>,
    pub seed: u64,
    pub capture_date: NaiveDate,
}

impl SynthSceneSpec {
    pub fn new(room: [f64; 3], floor_density: f64, seed: u64, capture_date: NaiveDate) -> Self {
        Self {
            room,
            floor_density,
            wall_density: 0.0,
            slab_thickness: 0.2,
            wall_thickness: 0.2,
            obstacles: Vec::new(),
            seed,
            capture_date,
        }
    }

    pub fn floor_point_count(&self) -> usize {
        (self.floor_density * self.room[0] * self.room[1]).round() as usize
    }

    pub fn wall_point_count(&self) -> usize {
        (self.wall_density * self.room[0] * self.room[2]).round() as usize
    }

    fn validate(&self) -> Result<(), SynthError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.room.iter().all(|&v| positive(v))
            || !positive(self.slab_thickness)
            || !positive(self.wall_thickness)
        {
            return Err(SynthError::InvalidSpec("room extents and thicknesses must be > 0".into()));
        }
        if !positive(self.floor_density) || !(self.wall_density >= 0.0) {
            return Err(SynthError::InvalidSpec("floor density must be > 0, wall density >= 0".into()));
        }
        if self.floor_point_count() == 0 {
            return Err(SynthError::InvalidSpec("floor density yields no floor points".into()));
        }
        if self.room[1] <= SCENE_CLEARANCE || self.room[2] <= SCENE_CLEARANCE {
            return Err(SynthError::InvalidSpec("room is smaller than the clearance".into()));
        }
        let [lx, ly, lz] = self.room;
        let max = [lx, ly - SCENE_CLEARANCE, lz];
        let min = [0.0, 0.0, SCENE_CLEARANCE];
        for (i, o) in self.obstacles.iter().enumerate() {
            let (lo, hi) = o.bounds();
            let inside = (0..3).all(|k| o.dims[k] > 0.0 && lo[k] >= min[k] && hi[k] <= max[k]);
            if !inside {
                return Err(SynthError::ObstacleOutsideRoom(i));
            }
        }
        Ok(())
    }

    /// Floor slab and wall as BIM elements (8 corner vertices each).
    pub fn elements(&self) -> Vec<BimElement> {
        let [lx, ly, lz] = self.room;
        vec![
            BimElement {
                id: SCENE_FLOOR_ID.into(),
                kind: ElementKind::Floor,
                vertices: box_corners([0.0, 0.0, -self.slab_thickness], [lx, ly, 0.0]),
            },
            BimElement {
                id: SCENE_WALL_ID.into(),
                kind: ElementKind::Wall,
                vertices: box_corners([0.0, ly, 0.0], [lx, ly + self.wall_thickness, lz]),
            },
        ]
    }
}

pub fn box_corners(lo: [f64; 3], hi: [f64; 3]) -> Vec<Point3> {
    let mut v = Vec::with_capacity(8);
    for z in [lo[2], hi[2]] {
        for (x, y) in [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])] {
            v.push(Point3::new(x, y, z));
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SceneLabel {
    Floor,
    Wall,
    /// Index into the spec's obstacles.
    Obstacle(usize),
}

impl SceneLabel {
    /// Classification label name: element id or `TEMPORARY`.
    pub fn name(&self) -> &'static str {
        match self {
            SceneLabel::Floor => SCENE_FLOOR_ID,
            SceneLabel::Wall => SCENE_WALL_ID,
            SceneLabel::Obstacle(_) => crate::geometry::TEMPORARY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    /// In the BIM frame.
    pub cloud: PointCloud,
    pub labels: Vec<SceneLabel>,
    pub expected: SpatialMetrics,
    pub elements: Vec<BimElement>,
}

impl SynthScene {
    /// The same points expressed in a scanner frame, where `bim_to_scanner` maps BIM
    /// coordinates to scanner coordinates.
    pub fn in_scanner_frame(&self, bim_to_scanner: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.cloud.points.iter().map(|p| bim_to_scanner.apply(p)).collect(),
            capture_date: self.cloud.capture_date,
            frame: Frame::Scanner,
        }
    }
}

fn sample_box(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> Point3 {
    let mut c = [0.0; 3];
    for k in 0..3 {
        c[k] = if hi[k] > lo[k] { rng.random_range(lo[k]..hi[k]) } else { lo[k] };
    }
    Point3::from(c)
}

/// Samples the scene and computes the metrics it must produce.
pub fn gen_scene(spec: &SynthSceneSpec) -> Result<SynthScene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [lx, ly, lz] = spec.room;
    let mut tagged: Vec<(Point3, SceneLabel)> = Vec::new();
    for _ in 0..spec.floor_point_count() {
        let p = sample_box(&mut rng, [0.0, 0.0, 0.0], [lx, ly - SCENE_CLEARANCE, 0.0]);
        tagged.push((p, SceneLabel::Floor));
    }
    for _ in 0..spec.wall_point_count() {
        let p = sample_box(&mut rng, [0.0, ly, SCENE_CLEARANCE], [lx, ly, lz]);
        tagged.push((p, SceneLabel::Wall));
    }
    for (i, o) in spec.obstacles.iter().enumerate() {
        let (lo, hi) = o.bounds();
        for _ in 0..o.points {
            tagged.push((sample_box(&mut rng, lo, hi), SceneLabel::Obstacle(i)));
        }
    }
    tagged.shuffle(&mut rng);
    let (points, labels): (Vec<Point3>, Vec<SceneLabel>) = tagged.into_iter().unzip();

    let n_floor = labels.iter().filter(|l| **l == SceneLabel::Floor).count();
    let temp: Vec<&Point3> = points
        .iter()
        .zip(&labels)
        .filter(|(_, l)| matches!(l, SceneLabel::Obstacle(_)))
        .map(|(p, _)| p)
        .collect();
    let n_temp = temp.len();
    let closeness = (n_temp > 0).then(|| {
        let mut s = [0.0; 3];
        for p in &temp {
            s[0] += p.x;
            s[1] += p.y;
            s[2] += p.z;
        }
        s.map(|v| v / n_temp as f64)
    });
    let expected = SpatialMetrics {
        capture_date: spec.capture_date,
        closeness,
        utilization_extent: n_temp as f64 / (n_temp + n_floor) as f64,
        n_temp,
        n_floor,
    };
    Ok(SynthScene {
        cloud: PointCloud::new(points, Frame::Bim).with_capture_date(spec.capture_date),
        labels,
        expected,
        elements: spec.elements(),
    })
}

/// A scene with `1..=3` random boxes, used for property checks.
pub fn random_scene_spec(seed: u64, capture_date: NaiveDate) -> SynthSceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5cee);
    let room = [
        rng.random_range(4.0..12.0),
        rng.random_range(4.0..10.0),
        rng.random_range(2.5..4.0),
    ];
    let mut spec = SynthSceneSpec::new(room, rng.random_range(3.0..15.0), seed, capture_date);
    spec.wall_density = rng.random_range(0.0..5.0);
    let n = rng.random_range(0..=3);
    for _ in 0..n {
        let dims = [
            rng.random_range(0.3..2.0_f64).min(room[0] - 0.1),
            rng.random_range(0.3..2.0_f64).min(room[1] - SCENE_CLEARANCE - 0.1),
            rng.random_range(0.3..2.0_f64).min(room[2] - SCENE_CLEARANCE - 0.1),
        ];
        let center = [
            rng.random_range(dims[0] / 2.0..room[0] - dims[0] / 2.0),
            rng.random_range(dims[1] / 2.0..room[1] - SCENE_CLEARANCE - dims[1] / 2.0),
            rng.random_range(SCENE_CLEARANCE + dims[2] / 2.0..room[2] - dims[2] / 2.0),
        ];
        spec.obstacles.push(ObstacleBox {
            center,
            dims,
            points: rng.random_range(1..600),
        });
    }
    spec
}

/// Rotation about a uniformly random axis by a random angle, translation within ±10 m.
pub fn random_rigid_transform<R: Rng>(rng: &mut R) -> RigidTransform {
    use nalgebra::Vector3;
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let t = Vector3::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
    );
    RigidTransform::from_axis_angle(axis, angle, t)
}

/// `n` points uniform in `[-50, 50]³`.
pub fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| sample_box(&mut rng, [-50.0; 3], [50.0; 3]))
        .collect();
    PointCloud::new(points, Frame::Scanner)
}
