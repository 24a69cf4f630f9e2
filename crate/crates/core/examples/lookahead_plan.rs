//! Turns per-task median forecasts into a banded lookahead plan and prints it as Markdown.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use site_lookahead::calendar::WorkCalendar;
use site_lookahead::lookahead::{build_lookahead_plan, horizon_dates, plan_to_markdown, BandMae};
use site_lookahead::synth::site_bim;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bim = site_bim();
    let start = NaiveDate::from_ymd_opt(2022, 6, 10).unwrap();
    let horizon = horizon_dates(start, 18, &WorkCalendar::default());

    // A flat 94% for the fixtures task and a slow climb for the epoxy coat.
    let mut medians = BTreeMap::new();
    medians.insert("db_fixtures".to_string(), vec![94.0; 18]);
    medians.insert(
        "epoxy_paint".to_string(),
        (0..18).map(|i| 64.0 + 15.0 * i as f64 / 17.0).collect(),
    );
    let plan = build_lookahead_plan(&medians, &BandMae::global(16.57), &bim, &horizon, start)?;
    print!("{}", plan_to_markdown(&plan));
    Ok(())
}
