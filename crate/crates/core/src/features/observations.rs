//! Material-condition observations and percentage completion.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::bim::{PlannedTask, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observed {
    /// Recognized quantity of the material condition, in the task's unit.
    Quantity { value: f64, unit: Unit },
    /// Percentage completion recorded directly.
    Percent(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub date: NaiveDate,
    pub material_condition: String,
    pub observed: Observed,
}

/// `100 · observed / planned`, clamped to `[0, 100]`.
pub fn compute_percentage_complete(
    observed_quantity: f64,
    unit: Unit,
    task: &PlannedTask,
) -> Result<f64, FeatureError> {
    if unit != task.unit {
        return Err(FeatureError::UnitMismatch {
            observed: unit,
            planned: task.unit,
        });
    }
    if !(task.planned_quantity > 0.0) {
        return Err(FeatureError::NonPositivePlanned(task.id.clone()));
    }
    if !(observed_quantity >= 0.0 && observed_quantity.is_finite()) {
        return Err(FeatureError::InvalidObservation(format!(
            "observed quantity {observed_quantity}"
        )));
    }
    Ok((100.0 * observed_quantity / task.planned_quantity).clamp(0.0, 100.0))
}

impl ObservationRecord {
    pub fn percentage(&self, task: &PlannedTask) -> Result<f64, FeatureError> {
        match self.observed {
            Observed::Quantity { value, unit } => compute_percentage_complete(value, unit, task),
            Observed::Percent(p) if (0.0..=100.0).contains(&p) => Ok(p),
            Observed::Percent(p) => Err(FeatureError::InvalidObservation(format!(
                "percentage {p} outside [0, 100]"
            ))),
        }
    }
}

const QUANTITY_HEADER: [&str; 4] = ["date", "material_condition", "observed_quantity", "unit"];
const PERCENT_HEADER: [&str; 3] = ["date", "material_condition", "pct"];

fn bad(line: usize, reason: impl Into<String>) -> FeatureError {
    FeatureError::Malformed {
        line,
        reason: reason.into(),
    }
}

pub(crate) fn parse_date(s: &str, line: usize) -> Result<NaiveDate, FeatureError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| bad(line, format!("bad date {s:?}")))
}

/// Reads either CSV mode; the header decides which.
pub fn read_observations<R: Read>(reader: R) -> Result<Vec<ObservationRecord>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let quantity_mode = if header == QUANTITY_HEADER {
        true
    } else if header == PERCENT_HEADER {
        false
    } else {
        return Err(bad(1, format!("unrecognized observations header {header:?}")));
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let date = parse_date(&rec[0], line)?;
        let material_condition = rec[1].to_string();
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| bad(line, format!("bad number {:?}", &rec[2])))?;
        let observed = if quantity_mode {
            let unit: Unit = rec[3].parse().map_err(|_| bad(line, format!("bad unit {:?}", &rec[3])))?;
            Observed::Quantity { value, unit }
        } else {
            Observed::Percent(value)
        };
        out.push(ObservationRecord {
            date,
            material_condition,
            observed,
        });
    }
    Ok(out)
}

pub fn read_observations_file(path: &Path) -> Result<Vec<ObservationRecord>, FeatureError> {
    read_observations(std::fs::File::open(path)?)
}

/// Writes records in a single mode; mixing quantity and percent records is an error.
pub fn write_observations<W: Write>(
    writer: W,
    records: &[ObservationRecord],
) -> Result<(), FeatureError> {
    let quantity_mode = matches!(
        records.first().map(|r| r.observed),
        Some(Observed::Quantity { .. })
    );
    let mut w = csv::Writer::from_writer(writer);
    if quantity_mode {
        w.write_record(QUANTITY_HEADER)?;
    } else {
        w.write_record(PERCENT_HEADER)?;
    }
    for r in records {
        let date = r.date.format("%Y-%m-%d").to_string();
        match (r.observed, quantity_mode) {
            (Observed::Quantity { value, unit }, true) => w.write_record([
                date,
                r.material_condition.clone(),
                value.to_string(),
                unit.to_string(),
            ])?,
            (Observed::Percent(p), false) => {
                w.write_record([date, r.material_condition.clone(), p.to_string()])?
            }
            _ => {
                return Err(FeatureError::InvalidObservation(
                    "observation CSV modes are mutually exclusive".into(),
                ))
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(q: f64, unit: Unit) -> PlannedTask {
        PlannedTask {
            id: "t".into(),
            material_condition: "CMU".into(),
            element_id: "wall".into(),
            planned_quantity: q,
            unit,
            start_date: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
            duration_days: 19,
        }
    }

    #[test]
    fn full_cmu_is_hundred_percent() {
        let t = task(37.6, Unit::SquareMeter);
        assert_eq!(compute_percentage_complete(37.6, Unit::SquareMeter, &t).unwrap(), 100.0);
        assert_eq!(compute_percentage_complete(0.0, Unit::SquareMeter, &t).unwrap(), 0.0);
        assert_eq!(compute_percentage_complete(50.0, Unit::SquareMeter, &t).unwrap(), 100.0);
    }

    #[test]
    fn unit_mismatch_is_rejected() {
        let t = task(44.0, Unit::Meter);
        assert!(matches!(
            compute_percentage_complete(28.16, Unit::SquareMeter, &t),
            Err(FeatureError::UnitMismatch { .. })
        ));
    }

    #[test]
    fn non_positive_plan_is_rejected() {
        let t = task(0.0, Unit::Meter);
        assert!(matches!(
            compute_percentage_complete(1.0, Unit::Meter, &t),
            Err(FeatureError::NonPositivePlanned(_))
        ));
    }

    #[test]
    fn csv_modes() {
        let q = "date,material_condition,observed_quantity,unit\n2022-02-02,CMU,37.6,m2\n";
        let recs = read_observations(q.as_bytes()).unwrap();
        assert_eq!(
            recs[0].observed,
            Observed::Quantity {
                value: 37.6,
                unit: Unit::SquareMeter
            }
        );
        let p = "date,material_condition,pct\n2022-06-08,Epoxy paint,64\n";
        let recs = read_observations(p.as_bytes()).unwrap();
        assert_eq!(recs[0].observed, Observed::Percent(64.0));
        let mut buf = Vec::new();
        write_observations(&mut buf, &recs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), p);
        assert!(read_observations("date,foo\n".as_bytes()).is_err());
    }

    #[test]
    fn mixed_modes_cannot_be_written() {
        let d = NaiveDate::from_ymd_opt(2022, 2, 2).unwrap();
        let recs = vec![
            ObservationRecord {
                date: d,
                material_condition: "CMU".into(),
                observed: Observed::Percent(1.0),
            },
            ObservationRecord {
                date: d,
                material_condition: "CMU".into(),
                observed: Observed::Quantity {
                    value: 1.0,
                    unit: Unit::Meter,
                },
            },
        ];
        assert!(write_observations(Vec::new(), &recs).is_err());
    }
}
