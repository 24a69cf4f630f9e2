//! Append-only CSV log of per-scan spatial metrics.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::classify::SpatialMetrics;
use super::GeometryError;

pub const METRICS_HEADER: [&str; 7] = [
    "date",
    "closeness_x",
    "closeness_y",
    "closeness_z",
    "utilization_extent",
    "n_temp",
    "n_floor",
];

fn record(m: &SpatialMetrics) -> [String; 7] {
    let (x, y, z) = match m.closeness {
        Some([x, y, z]) => (x.to_string(), y.to_string(), z.to_string()),
        None => (String::new(), String::new(), String::new()),
    };
    [
        m.capture_date.format("%Y-%m-%d").to_string(),
        x,
        y,
        z,
        m.utilization_extent.to_string(),
        m.n_temp.to_string(),
        m.n_floor.to_string(),
    ]
}

/// Writes a complete log (header plus rows).
pub fn write_metrics<W: Write>(writer: W, rows: &[SpatialMetrics]) -> Result<(), GeometryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for m in rows {
        w.write_record(record(m))?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one row, creating the file with its header when needed.
pub fn append_metrics(path: &Path, m: &SpatialMetrics) -> Result<(), GeometryError> {
    let needs_header = std::fs::metadata(path).map(|md| md.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if needs_header {
        w.write_record(METRICS_HEADER)?;
    }
    w.write_record(record(m))?;
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, GeometryError> {
    s.trim().parse().map_err(|_| GeometryError::MalformedLine {
        line,
        reason: format!("bad {what}: {s:?}"),
    })
}

pub fn read_metrics<R: Read>(reader: R) -> Result<Vec<SpatialMetrics>, GeometryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(METRICS_HEADER) {
        return Err(GeometryError::MalformedLine {
            line: 1,
            reason: format!("unexpected metrics header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 7 {
            return Err(GeometryError::MalformedLine {
                line,
                reason: "expected 7 fields".into(),
            });
        }
        let capture_date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|_| {
            GeometryError::MalformedLine {
                line,
                reason: format!("bad date {:?}", &rec[0]),
            }
        })?;
        let closeness = if rec[1].trim().is_empty() && rec[2].trim().is_empty() && rec[3].trim().is_empty() {
            None
        } else {
            Some([
                parse_field(&rec[1], line, "closeness_x")?,
                parse_field(&rec[2], line, "closeness_y")?,
                parse_field(&rec[3], line, "closeness_z")?,
            ])
        };
        let utilization_extent: f64 = parse_field(&rec[4], line, "utilization_extent")?;
        if !(0.0..=1.0).contains(&utilization_extent) {
            return Err(GeometryError::MalformedLine {
                line,
                reason: "utilization_extent outside [0, 1]".into(),
            });
        }
        out.push(SpatialMetrics {
            capture_date,
            closeness,
            utilization_extent,
            n_temp: parse_field(&rec[5], line, "n_temp")?,
            n_floor: parse_field(&rec[6], line, "n_floor")?,
        });
    }
    Ok(out)
}

pub fn read_metrics_log(path: &Path) -> Result<Vec<SpatialMetrics>, GeometryError> {
    read_metrics(std::fs::File::open(path)?)
}
