//! Sliding windows over task series and the chronological train/validation/test split.

use chrono::NaiveDate;
use ndarray::{Array1, Array2};

use super::scaler::{fit_scaler, ScalerParams};
use super::table::{FeatureTable, TaskSeries, FEATURE_WIDTH, PCT_INDEX};
use super::FeatureError;

/// Timesteps per encoder input and per forecast horizon.
pub const DEFAULT_WINDOW: usize = 18;
/// Windows held out as the chronologically last block.
pub const DEFAULT_TEST_COUNT: usize = 18;
/// Share of the non-test windows reserved for validation.
pub const VALIDATION_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub task_id: String,
    /// Date of the last input timestep.
    pub anchor_date: NaiveDate,
    /// `window × 12` features for timesteps `t−window+1 ..= t`.
    pub inputs: Array2<f64>,
    /// Percentage for timesteps `t+1 ..= t+window`.
    pub targets: Array1<f64>,
    pub target_dates: Vec<NaiveDate>,
}

/// Stride-`stride` windows of one series; each needs `window` inputs plus `window` targets.
pub fn make_windows(
    series: &TaskSeries,
    window: usize,
    stride: usize,
) -> Result<Vec<FeatureWindow>, FeatureError> {
    if window == 0 || stride == 0 {
        return Err(FeatureError::InvalidWindow { window, stride });
    }
    let n = series.len();
    if n < 2 * window {
        return Err(FeatureError::SeriesTooShort {
            task: series.task_id.clone(),
            len: n,
            needed: 2 * window,
        });
    }
    let features: Vec<[f64; FEATURE_WIDTH]> = series.rows.iter().map(|r| r.features()).collect();
    let mut out = Vec::new();
    let mut anchor = window - 1;
    while anchor + window < n {
        let start = anchor + 1 - window;
        let mut inputs = Array2::zeros((window, FEATURE_WIDTH));
        for (i, row) in features[start..=anchor].iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                inputs[[i, k]] = v;
            }
        }
        let horizon = &series.rows[anchor + 1..=anchor + window];
        out.push(FeatureWindow {
            task_id: series.task_id.clone(),
            anchor_date: series.rows[anchor].date,
            inputs,
            targets: horizon.iter().map(|r| r.pct).collect(),
            target_dates: horizon.iter().map(|r| r.date).collect(),
        });
        anchor += stride;
    }
    Ok(out)
}

/// Windows from every series long enough to yield one; shorter series are skipped.
pub fn make_table_windows(
    table: &FeatureTable,
    window: usize,
    stride: usize,
) -> Result<Vec<FeatureWindow>, FeatureError> {
    let mut out = Vec::new();
    for s in &table.series {
        match make_windows(s, window, stride) {
            Ok(w) => out.extend(w),
            Err(FeatureError::SeriesTooShort { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(FeatureError::InsufficientWindows { got: 0, needed: 1 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<FeatureWindow>,
    pub validation: Vec<FeatureWindow>,
    pub test: Vec<FeatureWindow>,
}

/// Chronological split: the last `test_count` windows are the test block, the last 10%
/// (at least one) of the remainder is validation, the rest is training.
pub fn split_dataset(
    mut windows: Vec<FeatureWindow>,
    test_count: usize,
) -> Result<DatasetSplit, FeatureError> {
    if windows.len() < 3 {
        return Err(FeatureError::InsufficientWindows {
            got: windows.len(),
            needed: 3,
        });
    }
    if test_count == 0 || test_count + 2 > windows.len() {
        return Err(FeatureError::InsufficientWindows {
            got: windows.len(),
            needed: test_count.max(1) + 2,
        });
    }
    windows.sort_by(|a, b| {
        a.anchor_date
            .cmp(&b.anchor_date)
            .then_with(|| a.task_id.cmp(&b.task_id))
    });
    let test = windows.split_off(windows.len() - test_count);
    let remaining = windows.len();
    let n_val = ((VALIDATION_FRACTION * remaining as f64).ceil() as usize).clamp(1, remaining - 1);
    let validation = windows.split_off(remaining - n_val);
    Ok(DatasetSplit {
        train: windows,
        validation,
        test,
    })
}

/// Fits the scaler on the input rows of the training windows only.
pub fn fit_scaler_on_windows(train: &[FeatureWindow]) -> Result<ScalerParams, FeatureError> {
    let rows: Vec<Vec<f64>> = train
        .iter()
        .flat_map(|w| w.inputs.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        .collect();
    fit_scaler(&rows)
}

pub fn scale_window(w: &FeatureWindow, scaler: &ScalerParams) -> Result<FeatureWindow, FeatureError> {
    if scaler.width() != w.inputs.ncols() {
        return Err(FeatureError::WidthMismatch {
            expected: scaler.width(),
            got: w.inputs.ncols(),
        });
    }
    let mut inputs = w.inputs.clone();
    for mut row in inputs.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = scaler.apply_value(k, *v);
        }
    }
    Ok(FeatureWindow {
        inputs,
        targets: w.targets.mapv(|p| scaler.apply_value(PCT_INDEX, p)),
        ..w.clone()
    })
}

pub fn scale_windows(
    windows: &[FeatureWindow],
    scaler: &ScalerParams,
) -> Result<Vec<FeatureWindow>, FeatureError> {
    windows.iter().map(|w| scale_window(w, scaler)).collect()
}

/// A split scaled with a scaler fitted on its own training block.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: DatasetSplit,
    pub scaler: ScalerParams,
}

pub fn prepare_dataset(
    table: &FeatureTable,
    window: usize,
    stride: usize,
    test_count: usize,
) -> Result<PreparedData, FeatureError> {
    let raw = split_dataset(make_table_windows(table, window, stride)?, test_count)?;
    let scaler = fit_scaler_on_windows(&raw.train)?;
    Ok(PreparedData {
        split: DatasetSplit {
            train: scale_windows(&raw.train, &scaler)?,
            validation: scale_windows(&raw.validation, &scaler)?,
            test: scale_windows(&raw.test, &scaler)?,
        },
        scaler,
    })
}
