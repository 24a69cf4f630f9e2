//! The default fixture: one finishing-works wall, eight material conditions observed on
//! working days from 2022-02-02 to 2022-07-18, and five scans.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::progress::{gen_progress, ProgressCurve, SynthProgress, SynthProgressSpec};
use super::scene::{gen_scene, random_rigid_transform, ObstacleBox, SynthScene, SynthSceneSpec};
use super::SynthError;
use crate::bim::{parse_bim, Bim4D};
use crate::calendar::WorkCalendar;
use crate::geometry::{Point3, RigidTransform};

pub const SITE_BIM_JSON: &str = include_str!("../../fixtures/site_bim.json");

fn d(m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, m, day).expect("valid fixture date")
}

pub fn site_bim() -> Bim4D {
    parse_bim(SITE_BIM_JSON).expect("bundled BIM is valid")
}

pub fn site_scan_dates() -> Vec<NaiveDate> {
    vec![d(2, 1), d(2, 12), d(3, 25), d(4, 15), d(4, 22)]
}

pub fn site_progress_spec(seed: u64) -> SynthProgressSpec {
    let curve = |name: &str, bp: &[(u32, u32, f64)]| ProgressCurve {
        material_condition: name.into(),
        breakpoints: bp.iter().map(|&(m, day, p)| (d(m, day), p)).collect(),
    };
    SynthProgressSpec {
        start: d(2, 2),
        end: d(7, 18),
        calendar: WorkCalendar::default(),
        curves: vec![
            curve("CMU", &[(2, 2, 100.0)]),
            curve("Wall drilling for conduit", &[(2, 2, 40.0), (2, 14, 100.0)]),
            curve("Conduit installation", &[(2, 2, 25.0), (2, 14, 100.0)]),
            curve(
                "First coat plaster",
                &[(2, 2, 0.0), (2, 4, 10.0), (2, 20, 86.0), (5, 30, 86.0), (6, 1, 100.0)],
            ),
            curve(
                "Second coat plaster",
                &[(2, 2, 0.0), (2, 4, 4.0), (2, 20, 81.0), (5, 30, 81.0), (6, 1, 100.0)],
            ),
            curve(
                "Epoxy paint",
                &[(3, 7, 0.0), (4, 14, 28.0), (5, 19, 47.0), (6, 9, 64.0), (7, 17, 71.0)],
            ),
            curve(
                "Fix DBs and fixtures",
                &[
                    (2, 2, 4.0),
                    (2, 4, 8.0),
                    (2, 20, 46.0),
                    (3, 22, 46.0),
                    (4, 21, 84.0),
                    (6, 9, 93.0),
                    (7, 18, 97.0),
                ],
            ),
            curve("HVAC_paint", &[(4, 25, 0.0), (6, 3, 100.0)]),
        ],
        noise: 0.0,
        seed,
    }
}

/// Scene per scan date; temporary storage shrinks and drifts towards the wall's east end.
pub fn site_scene_specs(seed: u64) -> Vec<SynthSceneSpec> {
    let boxes: [Vec<ObstacleBox>; 5] = [
        vec![
            ObstacleBox { center: [3.6, 3.9, 0.82], dims: [1.4, 1.0, 1.2], points: 198 },
            ObstacleBox { center: [5.18, 3.64, 0.82], dims: [1.0, 1.2, 1.2], points: 198 },
        ],
        vec![ObstacleBox { center: [4.6, 3.6, 0.74], dims: [1.6, 1.2, 1.0], points: 336 }],
        vec![ObstacleBox { center: [5.0, 3.5, 0.64], dims: [1.4, 1.2, 0.9], points: 271 }],
        vec![ObstacleBox { center: [5.4, 3.4, 0.55], dims: [1.2, 1.0, 0.8], points: 216 }],
        vec![ObstacleBox { center: [5.64, 3.31, 0.48], dims: [1.0, 1.0, 0.84], points: 177 }],
    ];
    site_scan_dates()
        .into_iter()
        .zip(boxes)
        .enumerate()
        .map(|(i, (date, obstacles))| {
            let mut s = SynthSceneSpec::new([9.0, 7.0, 3.0], 8.0, seed.wrapping_add(i as u64), date);
            s.wall_density = 5.0;
            s.obstacles = obstacles;
            s
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SiteFixture {
    pub bim: Bim4D,
    pub progress: SynthProgress,
    /// Scenes in the BIM frame, one per scan date.
    pub scenes: Vec<SynthScene>,
    pub bim_to_scanner: RigidTransform,
    /// `(scanner, bim)` coordinates of slab and wall corners.
    pub correspondences: Vec<(Point3, Point3)>,
}

pub fn site_fixture(seed: u64) -> Result<SiteFixture, SynthError> {
    let bim = site_bim();
    let progress = gen_progress(&site_progress_spec(seed))?;
    let scenes = site_scene_specs(seed)
        .iter()
        .map(gen_scene)
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bim_to_scanner = random_rigid_transform(&mut rng);
    let floor = bim.element("floor").expect("fixture floor");
    let wall = bim.element("wall").expect("fixture wall");
    let correspondences = floor
        .vertices
        .iter()
        .chain(wall.vertices.iter().filter(|p| p.z > 0.0))
        .map(|p| (bim_to_scanner.apply(p), *p))
        .collect();
    Ok(SiteFixture {
        bim,
        progress,
        scenes,
        bim_to_scanner,
        correspondences,
    })
}
