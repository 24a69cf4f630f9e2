//! Seeded generators with known answers: labelled room scans and progress curves.

mod fixture;
mod progress;
mod scene;

use thiserror::Error;

use crate::bim::BimError;
use crate::geometry::GeometryError;

pub use fixture::{
    site_bim, site_fixture, site_progress_spec, site_scan_dates, site_scene_specs,
    SiteFixture, SITE_BIM_JSON,
};
pub use progress::{gen_progress, ProgressCurve, SynthProgress, SynthProgressSpec};
pub use scene::{
    box_corners, gen_scene, random_cloud, random_rigid_transform, random_scene_spec,
    ObstacleBox, SceneLabel, SynthScene, SynthSceneSpec, SCENE_CLEARANCE, SCENE_FLOOR_ID,
    SCENE_WALL_ID,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("obstacle {0} lies outside the room or within the clearance band")]
    ObstacleOutsideRoom(usize),
    #[error("breakpoints of {0:?} are not increasing in date and non-decreasing in pct")]
    DecreasingBreakpoints(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bim(#[from] BimError),
}
