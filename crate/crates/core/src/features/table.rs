//! Long-format feature table: one row per observation date per material condition.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::encoding::{decompose_date, Vocabulary, CODE_BITS};
use super::observations::{parse_date, ObservationRecord};
use super::FeatureError;
use crate::bim::Bim4D;
use crate::geometry::SpatialMetrics;

/// Scalars per timestep fed to the encoder.
pub const FEATURE_WIDTH: usize = 12;
/// Column of the percentage feature within a feature vector.
pub const PCT_INDEX: usize = 4;
/// Column order tag written into checkpoints.
pub const FEATURE_ORDER: &str =
    "code3,code2,code1,code0,pct,closeness_x,closeness_y,closeness_z,utilization_extent,day,month,year";

pub const TABLE_HEADER: [&str; 7] = [
    "date",
    "pct",
    "material_condition",
    "closeness_x",
    "closeness_y",
    "closeness_z",
    "utilization_extent",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub task_id: String,
    pub material_condition: String,
    pub code: [u8; CODE_BITS],
    pub pct: f64,
    pub closeness: Option<[f64; 3]>,
    pub utilization_extent: f64,
}

impl FeatureRow {
    /// The 12 model inputs. An absent closeness contributes zeros.
    pub fn features(&self) -> [f64; FEATURE_WIDTH] {
        let (day, month, year) = decompose_date(self.date);
        let [cx, cy, cz] = self.closeness.unwrap_or([0.0; 3]);
        [
            self.code[0] as f64,
            self.code[1] as f64,
            self.code[2] as f64,
            self.code[3] as f64,
            self.pct,
            cx,
            cy,
            cz,
            self.utilization_extent,
            day as f64,
            month as f64,
            year as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSeries {
    pub task_id: String,
    pub material_condition: String,
    /// Ascending by date, one row per date.
    pub rows: Vec<FeatureRow>,
}

impl TaskSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// All task series, ordered by task id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub series: Vec<TaskSeries>,
}

impl FeatureTable {
    pub fn row_count(&self) -> usize {
        self.series.iter().map(TaskSeries::len).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &FeatureRow> {
        self.series.iter().flat_map(|s| s.rows.iter())
    }

    pub fn series_for(&self, task_id: &str) -> Option<&TaskSeries> {
        self.series.iter().find(|s| s.task_id == task_id)
    }
}

/// Latest metrics captured on or before `date`.
pub fn metrics_at(metrics: &[SpatialMetrics], date: NaiveDate) -> Option<&SpatialMetrics> {
    metrics
        .iter()
        .filter(|m| m.capture_date <= date)
        .max_by_key(|m| m.capture_date)
}

fn assemble(
    rows: Vec<FeatureRow>,
    bim: &Bim4D,
) -> Result<FeatureTable, FeatureError> {
    let mut by_task: BTreeMap<String, Vec<FeatureRow>> = BTreeMap::new();
    for r in rows {
        by_task.entry(r.task_id.clone()).or_default().push(r);
    }
    let mut series = Vec::with_capacity(by_task.len());
    for (task_id, mut rows) in by_task {
        rows.sort_by_key(|r| r.date);
        if let Some(w) = rows.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(FeatureError::DuplicateObservation {
                condition: w[0].material_condition.clone(),
                date: w[0].date,
            });
        }
        let material_condition = bim.task(&task_id)?.material_condition.clone();
        series.push(TaskSeries {
            task_id,
            material_condition,
            rows,
        });
    }
    Ok(FeatureTable { series })
}

/// Joins observations with the scan metrics in effect on each observation date.
///
/// Between scans the latest prior scan's metrics carry forward, so every date shares
/// the same spatial features across tasks.
pub fn build_feature_rows(
    observations: &[ObservationRecord],
    metrics_log: &[SpatialMetrics],
    bim: &Bim4D,
) -> Result<FeatureTable, FeatureError> {
    let vocab = Vocabulary::new(bim.vocabulary())?;
    let mut seen_dates = HashSet::new();
    for m in metrics_log {
        if !seen_dates.insert(m.capture_date) {
            return Err(FeatureError::DuplicateMetrics(m.capture_date));
        }
    }
    let mut rows = Vec::with_capacity(observations.len());
    for obs in observations {
        let task = bim.task_for_condition(&obs.material_condition)?;
        let pct = obs.percentage(task)?;
        let m = metrics_at(metrics_log, obs.date).ok_or(FeatureError::NoMetricsBefore(obs.date))?;
        rows.push(FeatureRow {
            date: obs.date,
            task_id: task.id.clone(),
            material_condition: task.material_condition.clone(),
            code: vocab.encode(&task.material_condition)?,
            pct,
            closeness: m.closeness,
            utilization_extent: m.utilization_extent,
        });
    }
    assemble(rows, bim)
}

pub fn write_feature_table<W: Write>(writer: W, table: &FeatureTable) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_HEADER)?;
    for r in table.rows() {
        let (x, y, z) = match r.closeness {
            Some([x, y, z]) => (x.to_string(), y.to_string(), z.to_string()),
            None => Default::default(),
        };
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.pct.to_string(),
            r.material_condition.clone(),
            x,
            y,
            z,
            r.utilization_extent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table<R: Read>(reader: R, bim: &Bim4D) -> Result<FeatureTable, FeatureError> {
    let vocab = Vocabulary::new(bim.vocabulary())?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().ne(TABLE_HEADER) {
        return Err(FeatureError::Malformed {
            line: 1,
            reason: "unexpected feature table header".into(),
        });
    }
    let num = |s: &str, line: usize| -> Result<f64, FeatureError> {
        s.parse().map_err(|_| FeatureError::Malformed {
            line,
            reason: format!("bad number {s:?}"),
        })
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let task = bim.task_for_condition(&rec[2])?;
        let closeness = if rec[3].is_empty() {
            None
        } else {
            Some([num(&rec[3], line)?, num(&rec[4], line)?, num(&rec[5], line)?])
        };
        rows.push(FeatureRow {
            date: parse_date(&rec[0], line)?,
            task_id: task.id.clone(),
            material_condition: task.material_condition.clone(),
            code: vocab.encode(&task.material_condition)?,
            pct: num(&rec[1], line)?,
            closeness,
            utilization_extent: num(&rec[6], line)?,
        });
    }
    assemble(rows, bim)
}

pub fn read_feature_table_file(path: &Path, bim: &Bim4D) -> Result<FeatureTable, FeatureError> {
    read_feature_table(std::fs::File::open(path)?, bim)
}
