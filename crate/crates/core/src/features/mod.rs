//! Turns observations and scan metrics into model-ready sequences: percentage completion,
//! binary condition codes, date parts, min-max scaling, windowing and the chronological split.

mod encoding;
mod observations;
mod scaler;
mod table;
mod windows;

use chrono::NaiveDate;
use thiserror::Error;

use crate::bim::{BimError, Unit};

pub use encoding::{
    decompose_date, encode_material_condition, Vocabulary, CODE_BITS, MAX_VOCABULARY,
};
pub use observations::{
    compute_percentage_complete, read_observations, read_observations_file, write_observations,
    ObservationRecord, Observed,
};
pub use scaler::{fit_scaler, ScalerParams};
pub use table::{
    build_feature_rows, metrics_at, read_feature_table, read_feature_table_file,
    write_feature_table, FeatureRow, FeatureTable, TaskSeries, FEATURE_ORDER, FEATURE_WIDTH,
    PCT_INDEX, TABLE_HEADER,
};
pub use windows::{
    fit_scaler_on_windows, make_table_windows, make_windows, prepare_dataset, scale_window,
    scale_windows, split_dataset, DatasetSplit, FeatureWindow, PreparedData, DEFAULT_TEST_COUNT,
    DEFAULT_WINDOW, VALIDATION_FRACTION,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Bim(#[from] BimError),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("observed unit {observed} does not match planned unit {planned}")]
    UnitMismatch { observed: Unit, planned: Unit },
    #[error("task {0:?} has a non-positive planned quantity")]
    NonPositivePlanned(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("unknown material condition {0:?}")]
    UnknownCondition(String),
    #[error("vocabulary of {0} terms does not fit in 4 binary digits")]
    VocabularyOverflow(usize),
    #[error("cannot fit a scaler on zero rows")]
    EmptyFit,
    #[error("expected {expected} features, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("no scan metrics on or before {0}")]
    NoMetricsBefore(NaiveDate),
    #[error("two metrics records for {0}")]
    DuplicateMetrics(NaiveDate),
    #[error("two observations of {condition:?} on {date}")]
    DuplicateObservation { condition: String, date: NaiveDate },
    #[error("window {window} / stride {stride} must both be >= 1")]
    InvalidWindow { window: usize, stride: usize },
    #[error("series {task:?} has {len} rows, needs at least {needed}")]
    SeriesTooShort { task: String, len: usize, needed: usize },
    #[error("{got} windows available, need at least {needed}")]
    InsufficientWindows { got: usize, needed: usize },
}
