//! Piecewise-linear progress curves sampled on working days.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::bim::Bim4D;
use crate::calendar::WorkCalendar;
use crate::features::{ObservationRecord, Observed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressCurve {
    pub material_condition: String,
    /// `(date, pct)` in strictly increasing date order with non-decreasing pct. The curve is
    /// flat before the first and after the last breakpoint.
    pub breakpoints: Vec<(NaiveDate, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProgressSpec {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub calendar: WorkCalendar,
    pub curves: Vec<ProgressCurve>,
    /// Half-width of uniform observation noise in percentage points; 0 disables it.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProgress {
    /// Observation dates (working days in `[start, end]`).
    pub dates: Vec<NaiveDate>,
    /// Percentage per condition, aligned with `dates`.
    pub actuals: BTreeMap<String, Vec<f64>>,
}

/// Number of working days in `[origin, d)`; a non-working `d` shares the position of the
/// next working day.
fn ordinal(calendar: &WorkCalendar, origin: NaiveDate, d: NaiveDate) -> f64 {
    match d.pred_opt() {
        Some(prev) => calendar.working_days_between(origin, prev).len() as f64,
        None => 0.0,
    }
}

impl ProgressCurve {
    fn validate(&self) -> Result<(), SynthError> {
        if self.breakpoints.is_empty() {
            return Err(SynthError::InvalidSpec(format!(
                "{:?} has no breakpoints",
                self.material_condition
            )));
        }
        for w in self.breakpoints.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(SynthError::DecreasingBreakpoints(self.material_condition.clone()));
            }
        }
        if self.breakpoints.iter().any(|(_, p)| !(0.0..=100.0).contains(p)) {
            return Err(SynthError::InvalidSpec(format!(
                "{:?} has a breakpoint outside [0, 100]",
                self.material_condition
            )));
        }
        Ok(())
    }

    /// Linear interpolation in working-day positions.
    pub fn value_at(&self, calendar: &WorkCalendar, d: NaiveDate) -> f64 {
        let bp = &self.breakpoints;
        let origin = bp[0].0;
        if d <= origin {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if d >= last.0 {
            return last.1;
        }
        let k = bp.iter().position(|(bd, _)| *bd > d).expect("d is before the last breakpoint");
        let (d0, p0) = bp[k - 1];
        let (d1, p1) = bp[k];
        let x0 = ordinal(calendar, origin, d0);
        let x1 = ordinal(calendar, origin, d1);
        let x = ordinal(calendar, origin, d);
        if x1 <= x0 {
            return p1;
        }
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }
}

pub fn gen_progress(spec: &SynthProgressSpec) -> Result<SynthProgress, SynthError> {
    if spec.end < spec.start {
        return Err(SynthError::InvalidSpec("end date precedes start date".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(SynthError::InvalidSpec(format!("noise {} must be >= 0", spec.noise)));
    }
    let dates = spec.calendar.working_days_between(spec.start, spec.end);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut actuals = BTreeMap::new();
    for c in &spec.curves {
        c.validate()?;
        if actuals.contains_key(&c.material_condition) {
            return Err(SynthError::InvalidSpec(format!(
                "duplicate curve for {:?}",
                c.material_condition
            )));
        }
        let mut running: f64 = 0.0;
        let values: Vec<f64> = dates
            .iter()
            .map(|&d| {
                let mut v = c.value_at(&spec.calendar, d);
                if spec.noise > 0.0 {
                    v = (v + rng.random_range(-spec.noise..=spec.noise)).clamp(0.0, 100.0);
                    running = running.max(v);
                    v = running;
                }
                v
            })
            .collect();
        actuals.insert(c.material_condition.clone(), values);
    }
    Ok(SynthProgress { dates, actuals })
}

impl SynthProgress {
    /// Percentage-mode observations, date-major.
    pub fn percent_observations(&self) -> Vec<ObservationRecord> {
        let mut out = Vec::new();
        for (i, &date) in self.dates.iter().enumerate() {
            for (cond, values) in &self.actuals {
                out.push(ObservationRecord {
                    date,
                    material_condition: cond.clone(),
                    observed: Observed::Percent(values[i]),
                });
            }
        }
        out
    }

    /// Quantity-mode observations in each task's planned unit.
    pub fn quantity_observations(&self, bim: &Bim4D) -> Result<Vec<ObservationRecord>, SynthError> {
        let mut tasks = BTreeMap::new();
        for cond in self.actuals.keys() {
            tasks.insert(cond.clone(), bim.task_for_condition(cond)?);
        }
        let mut out = Vec::new();
        for (i, &date) in self.dates.iter().enumerate() {
            for (cond, values) in &self.actuals {
                let t = tasks[cond];
                out.push(ObservationRecord {
                    date,
                    material_condition: cond.clone(),
                    observed: Observed::Quantity {
                        value: values[i] / 100.0 * t.planned_quantity,
                        unit: t.unit,
                    },
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, m, day).unwrap()
    }

    #[test]
    fn linear_over_ten_working_days() {
        let cal = WorkCalendar::default();
        let days = cal.working_days_from(d(2, 2), 11);
        let spec = SynthProgressSpec {
            start: days[0],
            end: days[10],
            calendar: cal,
            curves: vec![ProgressCurve {
                material_condition: "CMU".into(),
                breakpoints: vec![(days[0], 0.0), (days[10], 100.0)],
            }],
            noise: 0.0,
            seed: 0,
        };
        let p = gen_progress(&spec).unwrap();
        assert_eq!(p.dates.len(), 11);
        let v = &p.actuals["CMU"];
        assert_eq!(v[5], 50.0);
        for (i, x) in v.iter().enumerate() {
            assert!((x - 10.0 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn decreasing_rejected() {
        let spec = SynthProgressSpec {
            start: d(2, 2),
            end: d(3, 2),
            calendar: WorkCalendar::default(),
            curves: vec![ProgressCurve {
                material_condition: "x".into(),
                breakpoints: vec![(d(2, 2), 50.0), (d(2, 10), 40.0)],
            }],
            noise: 0.0,
            seed: 0,
        };
        assert!(matches!(gen_progress(&spec), Err(SynthError::DecreasingBreakpoints(_))));
    }

    #[test]
    fn noise_stays_monotone_and_bounded() {
        let spec = SynthProgressSpec {
            start: d(2, 2),
            end: d(6, 2),
            calendar: WorkCalendar::default(),
            curves: vec![ProgressCurve {
                material_condition: "x".into(),
                breakpoints: vec![(d(2, 2), 0.0), (d(5, 2), 100.0)],
            }],
            noise: 5.0,
            seed: 3,
        };
        let a = gen_progress(&spec).unwrap();
        assert_eq!(a, gen_progress(&spec).unwrap());
        let v = &a.actuals["x"];
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        assert!(v.iter().all(|x| (0.0..=100.0).contains(x)));
    }

    #[test]
    fn non_working_breakpoints() {
        let cal = WorkCalendar::default();
        // Saturday and the following Monday share a working-day position.
        let c = ProgressCurve {
            material_condition: "x".into(),
            breakpoints: vec![(d(2, 5), 0.0), (d(2, 11), 100.0)],
        };
        assert_eq!(c.value_at(&cal, d(2, 7)), 0.0);
        assert!((c.value_at(&cal, d(2, 9)) - 50.0).abs() < 1e-12);
        assert_eq!(c.value_at(&cal, d(2, 12)), 100.0);
    }
}
