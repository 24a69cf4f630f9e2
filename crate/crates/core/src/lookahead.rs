//! Banded lookahead plans: forecast median ± MAE, clamped to `[0, 100]`, compared with the
//! planned schedule.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bim::{BimError, Bim4D};
use crate::calendar::WorkCalendar;

#[derive(Debug, Error)]
pub enum LookaheadError {
    #[error(transparent)]
    Bim(#[from] BimError),
    #[error("horizon must contain at least one date")]
    EmptyHorizon,
    #[error("task {task:?} has {got} predictions, horizon has {expected}")]
    LengthMismatch {
        task: String,
        expected: usize,
        got: usize,
    },
    #[error("median {0} outside [0, 100]")]
    InvalidMedian(f64),
    #[error("MAE must be finite and >= 0, got {0}")]
    InvalidMae(f64),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// `(max(median − mae, 0), min(median + mae, 100))`.
pub fn error_bands(median: f64, mae: f64) -> (f64, f64) {
    ((median - mae).max(0.0), (median + mae).min(100.0))
}

/// Rounds to the 2-decimal grid used by every emitted format.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    OnTrack,
    AtRisk,
}

impl Flag {
    /// At risk when the plan expects more than the optimistic forecast limit.
    pub fn from_final(planned: f64, upper: f64) -> Self {
        if planned > upper {
            Flag::AtRisk
        } else {
            Flag::OnTrack
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::OnTrack => "ON_TRACK",
            Flag::AtRisk => "AT_RISK",
        }
    }
}

impl std::str::FromStr for Flag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ON_TRACK" => Ok(Flag::OnTrack),
            "AT_RISK" => Ok(Flag::AtRisk),
            other => Err(format!("unknown flag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBand {
    pub date: NaiveDate,
    pub task_id: String,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    /// Planned percentage on `date`.
    pub planned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub task_id: String,
    pub material_condition: String,
    pub mae: f64,
    pub bands: Vec<ForecastBand>,
    pub flag: Flag,
}

impl TaskPlan {
    pub fn final_band(&self) -> &ForecastBand {
        self.bands.last().expect("plans have a non-empty horizon")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookaheadPlan {
    pub generated_on: NaiveDate,
    pub horizon: Vec<NaiveDate>,
    pub tasks: Vec<TaskPlan>,
}

impl LookaheadPlan {
    pub fn bands(&self) -> impl Iterator<Item = &ForecastBand> {
        self.tasks.iter().flat_map(|t| t.bands.iter())
    }

    pub fn task(&self, id: &str) -> Option<&TaskPlan> {
        self.tasks.iter().find(|t| t.task_id == id)
    }
}

/// Band half-width: one global MAE with optional per-task overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BandMae {
    pub global: f64,
    #[serde(default)]
    pub per_task: BTreeMap<String, f64>,
}

impl BandMae {
    pub fn global(mae: f64) -> Self {
        Self {
            global: mae,
            per_task: BTreeMap::new(),
        }
    }

    pub fn for_task(&self, id: &str) -> f64 {
        self.per_task.get(id).copied().unwrap_or(self.global)
    }
}

/// Projected dates for a horizon of `n` steps: the first `n` working days on or after `start`.
pub fn horizon_dates(start: NaiveDate, n: usize, calendar: &WorkCalendar) -> Vec<NaiveDate> {
    calendar.working_days_from(start, n)
}

/// Builds a plan from per-task horizon predictions (percent). Values are kept on the
/// 2-decimal grid so that CSV output is lossless.
pub fn build_lookahead_plan(
    predictions: &BTreeMap<String, Vec<f64>>,
    mae: &BandMae,
    bim: &Bim4D,
    horizon: &[NaiveDate],
    generated_on: NaiveDate,
) -> Result<LookaheadPlan, LookaheadError> {
    if horizon.is_empty() {
        return Err(LookaheadError::EmptyHorizon);
    }
    let mut tasks = Vec::with_capacity(predictions.len());
    for (id, medians) in predictions {
        let task = bim.task(id)?;
        if medians.len() != horizon.len() {
            return Err(LookaheadError::LengthMismatch {
                task: id.clone(),
                expected: horizon.len(),
                got: medians.len(),
            });
        }
        let m = mae.for_task(id);
        if !(m >= 0.0 && m.is_finite()) {
            return Err(LookaheadError::InvalidMae(m));
        }
        let m = round2(m);
        let mut bands = Vec::with_capacity(horizon.len());
        for (&date, &median) in horizon.iter().zip(medians) {
            if !(0.0..=100.0).contains(&median) {
                return Err(LookaheadError::InvalidMedian(median));
            }
            let median = round2(median);
            let (lower, upper) = error_bands(median, m);
            bands.push(ForecastBand {
                date,
                task_id: id.clone(),
                median,
                lower: round2(lower),
                upper: round2(upper),
                planned: round2(task.planned_fraction_at(date)),
            });
        }
        let last = bands.last().expect("non-empty horizon");
        let flag = Flag::from_final(last.planned, last.upper);
        tasks.push(TaskPlan {
            task_id: id.clone(),
            material_condition: task.material_condition.clone(),
            mae: m,
            bands,
            flag,
        });
    }
    Ok(LookaheadPlan {
        generated_on,
        horizon: horizon.to_vec(),
        tasks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanFormat {
    Csv,
    Json,
    Markdown,
}

impl PlanFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            PlanFormat::Csv => "csv",
            PlanFormat::Json => "json",
            PlanFormat::Markdown => "md",
        }
    }
}

pub const PLAN_CSV_HEADER: [&str; 7] = ["task", "date", "median", "lower", "upper", "planned", "flag"];

pub fn write_plan_csv<W: Write>(plan: &LookaheadPlan, writer: W) -> Result<(), LookaheadError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PLAN_CSV_HEADER)?;
    for t in &plan.tasks {
        for b in &t.bands {
            w.write_record([
                b.task_id.clone(),
                b.date.to_string(),
                format!("{:.2}", b.median),
                format!("{:.2}", b.lower),
                format!("{:.2}", b.upper),
                format!("{:.2}", b.planned),
                t.flag.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows of a plan CSV, each with its task flag.
pub fn read_plan_csv<R: Read>(reader: R) -> Result<Vec<(ForecastBand, Flag)>, LookaheadError> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(PLAN_CSV_HEADER) {
        return Err(LookaheadError::Malformed {
            line: 1,
            reason: "unexpected plan header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |reason: String| LookaheadError::Malformed { line, reason };
        let num = |k: usize| -> Result<f64, LookaheadError> {
            rec[k].parse().map_err(|_| bad(format!("bad number {:?}", &rec[k])))
        };
        let band = ForecastBand {
            task_id: rec[0].to_string(),
            date: NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|_| bad(format!("bad date {:?}", &rec[1])))?,
            median: num(2)?,
            lower: num(3)?,
            upper: num(4)?,
            planned: num(5)?,
        };
        let flag = rec[6].parse().map_err(bad)?;
        out.push((band, flag));
    }
    Ok(out)
}

pub fn plan_to_json(plan: &LookaheadPlan) -> Result<String, LookaheadError> {
    Ok(serde_json::to_string_pretty(plan)?)
}

pub fn plan_from_json(text: &str) -> Result<LookaheadPlan, LookaheadError> {
    Ok(serde_json::from_str(text)?)
}

/// Two-decimal value with trailing zeros dropped: `100`, `94`, `77.43`, `62.4`.
pub fn format_pct(x: f64) -> String {
    let s = format!("{:.2}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Summary table with one row per task, plus the daily bands.
pub fn plan_to_markdown(plan: &LookaheadPlan) -> String {
    let mut out = String::new();
    let (first, last) = (plan.horizon[0], *plan.horizon.last().expect("non-empty horizon"));
    out.push_str(&format!("# Lookahead plan ({first} to {last})\n\n"));
    out.push_str(&format!("Generated on {}.\n\n", plan.generated_on));
    out.push_str(&format!(
        "| Task | Planned % ({first}) | Planned % ({last}) | Upper limit (+MAE) | Median | Lower limit (-MAE) | Flag |\n"
    ));
    out.push_str("|---|---|---|---|---|---|---|\n");
    for t in &plan.tasks {
        let f = t.final_band();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            t.material_condition,
            format_pct(t.bands[0].planned),
            format_pct(f.planned),
            format_pct(f.upper),
            format_pct(f.median),
            format_pct(f.lower),
            t.flag.as_str()
        ));
    }
    for t in &plan.tasks {
        out.push_str(&format!(
            "\n## {} (MAE {})\n\n| Date | Planned | Upper | Median | Lower |\n|---|---|---|---|---|\n",
            t.material_condition,
            format_pct(t.mae)
        ));
        for b in &t.bands {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                b.date,
                format_pct(b.planned),
                format_pct(b.upper),
                format_pct(b.median),
                format_pct(b.lower)
            ));
        }
    }
    out
}

pub fn emit_plan(plan: &LookaheadPlan, format: PlanFormat, path: &Path) -> Result<(), LookaheadError> {
    match format {
        PlanFormat::Csv => write_plan_csv(plan, std::fs::File::create(path)?),
        PlanFormat::Json => Ok(std::fs::write(path, plan_to_json(plan)?)?),
        PlanFormat::Markdown => Ok(std::fs::write(path, plan_to_markdown(plan))?),
    }
}
