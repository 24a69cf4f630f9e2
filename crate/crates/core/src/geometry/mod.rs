//! Scan geometry: registration into the BIM frame, element enclosures, point
//! classification and the utilization-extent / closeness metrics.

mod classify;
mod cloud;
mod correspondences;
mod enclosure;
mod hull;
mod metrics_log;
mod transform;

use thiserror::Error;

pub use classify::{
    classify_points, compute_spatial_metrics, ClassificationResult, PointLabel, SpatialMetrics,
    TEMPORARY,
};
pub use cloud::{load_point_cloud, save_point_cloud, CloudFormat, Frame, Point3, PointCloud};
pub use correspondences::{
    read_correspondences, read_correspondences_file, write_correspondences, CORRESPONDENCE_HEADER,
};
pub use enclosure::{build_enclosure, Enclosure, EnclosureShape, DEFAULT_ALLOWANCE};
pub use hull::{polytope_vertices, ConvexHull, HalfSpace};
pub use metrics_log::{
    append_metrics, read_metrics, read_metrics_log, write_metrics, METRICS_HEADER,
};
pub use transform::{
    apply_rigid_transform, estimate_rigid_transform, rms_residual, RigidTransform, TransformRepr,
    ORTHONORMAL_TOL,
};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("rotation is not orthonormal with det +1 (error {max_error:e})")]
    NotOrthonormal { max_error: f64 },
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("correspondence lists differ in length ({src} vs {dst})")]
    CorrespondenceMismatch { src: usize, dst: usize },
    #[error("correspondences are collinear or coincident")]
    DegenerateCorrespondences,
    #[error("enclosure vertices are degenerate")]
    DegenerateVertices,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("allowance must be finite and >= 0, got {0}")]
    InvalidAllowance(f64),
    #[error("cloud must be registered into the BIM frame before classification")]
    WrongFrame,
    #[error("duplicate enclosure element id {0:?}")]
    DuplicateElement(String),
    #[error("element id TEMPORARY is reserved")]
    ReservedElementId,
    #[error("floor element {0:?} is not among the classified enclosures")]
    UnknownFloor(String),
    #[error("{labels} labels for {points} points")]
    LabelCountMismatch { labels: usize, points: usize },
    #[error("scan has neither floor nor temporary points")]
    NoFloorOrTempPoints,
}
