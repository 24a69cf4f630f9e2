//! As-planned 4D BIM: element corner vertices plus the planned task schedule.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error)]
pub enum BimError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("task {task:?} references unknown element {element:?}")]
    DanglingElement { task: String, element: String },
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("material condition {0:?} matches no planned task")]
    UnknownCondition(String),
    #[error("material condition {0:?} is planned on more than one element")]
    AmbiguousCondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ElementKind {
    Wall,
    Floor,
    Ceiling,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimElement {
    pub id: String,
    pub kind: ElementKind,
    #[serde(with = "vertex_arrays")]
    pub vertices: Vec<Point3>,
}

mod vertex_arrays {
    use super::Point3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Point3], s: S) -> Result<S::Ok, S::Error> {
        let arr: Vec<[f64; 3]> = v.iter().map(|&p| p.into()).collect();
        arr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point3>, D::Error> {
        let arr: Vec<[f64; 3]> = Vec::deserialize(d)?;
        Ok(arr.into_iter().map(Point3::from).collect())
    }
}

/// Unit of a planned or observed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m2", alias = "m²", alias = "sqm")]
    SquareMeter,
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "count", alias = "ea")]
    Count,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::SquareMeter => "m2",
            Unit::Meter => "m",
            Unit::Count => "count",
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = BimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m2" | "m²" | "sqm" => Ok(Unit::SquareMeter),
            "m" => Ok(Unit::Meter),
            "count" | "ea" => Ok(Unit::Count),
            other => Err(BimError::Schema(format!("unknown unit {other:?}"))),
        }
    }
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTask {
    pub id: String,
    pub material_condition: String,
    pub element_id: String,
    pub planned_quantity: f64,
    pub unit: Unit,
    pub start_date: NaiveDate,
    pub duration_days: u32,
}

impl PlannedTask {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.duration_days as u64)
    }

    /// Planned percentage at a date, linear in calendar days over the task window.
    pub fn planned_fraction_at(&self, date: NaiveDate) -> f64 {
        self.planned_fraction_at_time(date.and_time(NaiveTime::MIN))
    }

    /// Same as [`planned_fraction_at`](Self::planned_fraction_at) with sub-day resolution.
    pub fn planned_fraction_at_time(&self, at: NaiveDateTime) -> f64 {
        let start = self.start_date.and_time(NaiveTime::MIN);
        let elapsed_days = (at - start).num_milliseconds() as f64 / 86_400_000.0;
        let duration = self.duration_days as f64;
        if elapsed_days <= 0.0 {
            0.0
        } else if elapsed_days >= duration {
            100.0
        } else {
            100.0 * elapsed_days / duration
        }
    }
}

/// Free-function form of [`PlannedTask::planned_fraction_at`].
pub fn planned_fraction_at(task: &PlannedTask, date: NaiveDate) -> f64 {
    task.planned_fraction_at(date)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bim4D {
    pub elements: Vec<BimElement>,
    pub tasks: Vec<PlannedTask>,
}

impl Bim4D {
    /// Checks every invariant; [`load_bim`] calls this before returning.
    pub fn validate(&self) -> Result<(), BimError> {
        let mut ids = HashSet::new();
        for e in &self.elements {
            if e.id.trim().is_empty() {
                return Err(BimError::Schema("element id is empty".into()));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(BimError::Schema(format!("elements: duplicate id {:?}", e.id)));
            }
            if e.vertices.len() < 4 {
                return Err(BimError::Schema(format!(
                    "elements[{}].vertices: need at least 4, got {}",
                    e.id,
                    e.vertices.len()
                )));
            }
            if !e.vertices.iter().all(Point3::is_finite) {
                return Err(BimError::Schema(format!("elements[{}].vertices: non-finite", e.id)));
            }
        }
        let mut task_ids = HashSet::new();
        let mut per_element = HashSet::new();
        for t in &self.tasks {
            if !task_ids.insert(t.id.as_str()) {
                return Err(BimError::Schema(format!("tasks: duplicate id {:?}", t.id)));
            }
            if !ids.contains(t.element_id.as_str()) {
                return Err(BimError::DanglingElement {
                    task: t.id.clone(),
                    element: t.element_id.clone(),
                });
            }
            if !(t.planned_quantity > 0.0 && t.planned_quantity.is_finite()) {
                return Err(BimError::Schema(format!(
                    "tasks[{}].planned_quantity must be > 0",
                    t.id
                )));
            }
            if t.duration_days < 1 {
                return Err(BimError::Schema(format!(
                    "tasks[{}].duration_days must be >= 1",
                    t.id
                )));
            }
            if t.material_condition.trim().is_empty() {
                return Err(BimError::Schema(format!(
                    "tasks[{}].material_condition is empty",
                    t.id
                )));
            }
            if !per_element.insert((t.element_id.as_str(), t.material_condition.as_str())) {
                return Err(BimError::Schema(format!(
                    "tasks[{}].material_condition {:?} repeats on element {:?}",
                    t.id, t.material_condition, t.element_id
                )));
            }
        }
        Ok(())
    }

    pub fn element(&self, id: &str) -> Option<&BimElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn task(&self, id: &str) -> Result<&PlannedTask, BimError> {
        self.tasks
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| BimError::UnknownTask(id.to_string()))
    }

    /// The single task carrying a material condition.
    pub fn task_for_condition(&self, condition: &str) -> Result<&PlannedTask, BimError> {
        let mut it = self.tasks.iter().filter(|t| t.material_condition == condition);
        let first = it
            .next()
            .ok_or_else(|| BimError::UnknownCondition(condition.to_string()))?;
        if it.next().is_some() {
            return Err(BimError::AmbiguousCondition(condition.to_string()));
        }
        Ok(first)
    }

    /// Sorted, de-duplicated material-condition names.
    pub fn vocabulary(&self) -> Vec<String> {
        self.tasks
            .iter()
            .map(|t| t.material_condition.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn floor_elements(&self) -> impl Iterator<Item = &BimElement> {
        self.elements.iter().filter(|e| e.kind == ElementKind::Floor)
    }
}

pub fn element_vertices<'a>(bim: &'a Bim4D, element_id: &str) -> Result<&'a [Point3], BimError> {
    bim.element(element_id)
        .map(|e| e.vertices.as_slice())
        .ok_or_else(|| BimError::UnknownElement(element_id.to_string()))
}

pub fn parse_bim(text: &str) -> Result<Bim4D, BimError> {
    let bim: Bim4D = serde_json::from_str(text).map_err(|e| BimError::Schema(e.to_string()))?;
    bim.validate()?;
    Ok(bim)
}

pub fn load_bim(path: &Path) -> Result<Bim4D, BimError> {
    parse_bim(&std::fs::read_to_string(path)?)
}

pub fn save_bim(bim: &Bim4D, path: &Path) -> Result<(), BimError> {
    let text = serde_json::to_string_pretty(bim).map_err(|e| BimError::Schema(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "elements": [{"id": "floor", "kind": "FLOOR",
                    "vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]]}],
      "tasks": [{"id": "t1", "material_condition": "Screed", "element_id": "floor",
                 "planned_quantity": 12.5, "unit": "m2",
                 "start_date": "2022-01-01", "duration_days": 4}]
    }"#;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn cmu() -> PlannedTask {
        PlannedTask {
            id: "cmu".into(),
            material_condition: "CMU".into(),
            element_id: "wall".into(),
            planned_quantity: 37.6,
            unit: Unit::SquareMeter,
            start_date: d(2022, 1, 1),
            duration_days: 19,
        }
    }

    #[test]
    fn minimal_instance_loads() {
        let bim = parse_bim(MINIMAL).unwrap();
        assert_eq!(bim.elements.len(), 1);
        assert_eq!(bim.tasks.len(), 1);
        assert_eq!(bim.elements[0].kind, ElementKind::Floor);
        assert_eq!(bim.vocabulary(), vec!["Screed".to_string()]);
    }

    #[test]
    fn dangling_element_is_reported() {
        let text = MINIMAL.replace(r#""element_id": "floor""#, r#""element_id": "slab""#);
        assert!(matches!(
            parse_bim(&text),
            Err(BimError::DanglingElement { .. })
        ));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = MINIMAL.replace("12.5", "0");
        match parse_bim(&text) {
            Err(BimError::Schema(msg)) => assert!(msg.contains("planned_quantity")),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replace(r#""duration_days": 4"#, r#""duration_days": 0"#);
        assert!(matches!(parse_bim(&text), Err(BimError::Schema(m)) if m.contains("duration_days")));
        let text = MINIMAL.replace(",[0,0,1]", "");
        assert!(matches!(parse_bim(&text), Err(BimError::Schema(m)) if m.contains("vertices")));
        let text = MINIMAL.replace("\"FLOOR\"", "\"ROOF\"");
        assert!(matches!(parse_bim(&text), Err(BimError::Schema(_))));
    }

    #[test]
    fn cmu_planned_fraction() {
        let t = cmu();
        assert_eq!(t.planned_fraction_at(d(2022, 1, 20)), 100.0);
        assert_eq!(t.planned_fraction_at(d(2022, 1, 1)), 0.0);
        assert_eq!(t.planned_fraction_at(d(2021, 12, 1)), 0.0);
        assert_eq!(t.planned_fraction_at(d(2022, 3, 1)), 100.0);
        let day10 = t.planned_fraction_at(d(2022, 1, 11));
        assert!((day10 - 100.0 * 10.0 / 19.0).abs() < 1e-12);
        assert!((day10 - 52.63).abs() < 0.01);
        let midpoint = d(2022, 1, 10).and_hms_opt(12, 0, 0).unwrap();
        assert!((t.planned_fraction_at_time(midpoint) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn planned_fraction_is_monotone() {
        let t = cmu();
        let mut prev = -1.0;
        let mut day = d(2021, 12, 20);
        while day < d(2022, 2, 10) {
            let f = t.planned_fraction_at(day);
            assert!(f >= prev && (0.0..=100.0).contains(&f));
            prev = f;
            day = day.succ_opt().unwrap();
        }
    }

    #[test]
    fn element_vertices_lookup() {
        let bim = parse_bim(MINIMAL).unwrap();
        assert_eq!(element_vertices(&bim, "floor").unwrap().len(), 4);
        assert!(matches!(
            element_vertices(&bim, "nope"),
            Err(BimError::UnknownElement(_))
        ));
    }

    #[test]
    fn condition_lookup() {
        let bim = parse_bim(MINIMAL).unwrap();
        assert_eq!(bim.task_for_condition("Screed").unwrap().id, "t1");
        assert!(matches!(
            bim.task_for_condition("Paint"),
            Err(BimError::UnknownCondition(_))
        ));
    }

    #[test]
    fn unit_parsing() {
        assert_eq!("m²".parse::<Unit>().unwrap(), Unit::SquareMeter);
        assert_eq!("count".parse::<Unit>().unwrap(), Unit::Count);
        assert!("kg".parse::<Unit>().is_err());
    }
}
