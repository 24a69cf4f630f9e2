use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1};
use sha2::{Digest, Sha256};

use super::config::{LoadedConfig, PipelineConfig};
use super::CliError;
use crate::bim::{load_bim, save_bim, Bim4D};
use crate::features::{
    build_feature_rows, make_table_windows, prepare_dataset, read_feature_table_file,
    read_observations_file, scale_windows, split_dataset, write_feature_table,
    write_observations, FeatureTable, PreparedData, FEATURE_WIDTH, PCT_INDEX,
};
use crate::geometry::{
    append_metrics, apply_rigid_transform, build_enclosure, classify_points,
    compute_spatial_metrics, estimate_rigid_transform, load_point_cloud,
    read_correspondences_file, read_metrics_log, save_point_cloud, write_correspondences,
    write_metrics, CloudFormat, RigidTransform,
};
use crate::gru::{
    evaluate, fit, grid_search, load_checkpoint, param_count_for, predict_horizon,
    save_checkpoint, Checkpoint, GridResult, TrainReport,
};
use crate::lookahead::{
    build_lookahead_plan, emit_plan, format_pct, horizon_dates, plan_from_json, plan_to_markdown,
    round2, BandMae, Flag, LookaheadPlan, PlanFormat,
};
use crate::synth::{gen_progress, site_fixture, site_progress_spec};

pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const GRID_REPORT_FILE: &str = "grid_report.json";
pub const SERIES_FILE: &str = "series.csv";
pub const REPORT_FILE: &str = "report.md";
/// Files written by `forecast` into the output directory.
pub const FORECAST_FILES: [&str; 4] = ["plan.csv", "plan.json", "plan.md", SERIES_FILE];

/// Epochs written into the synthetic fixture's config.
const SYNTH_EPOCHS: usize = 30;

pub struct Context {
    pub loaded: LoadedConfig,
    pub fixed_clock: Option<NaiveDate>,
}

impl Context {
    fn cfg(&self) -> &PipelineConfig {
        &self.loaded.config
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.loaded.resolve(p)
    }

    fn output_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.path(&self.cfg().output_dir);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(dir)
    }

    fn today(&self) -> NaiveDate {
        self.fixed_clock
            .unwrap_or_else(|| chrono::Local::now().date_naive())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// `104577` → `"104,577"`.
pub fn format_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn scan_date_from_name(path: &Path) -> Option<NaiveDate> {
    let name = path.file_stem()?.to_str()?;
    name.char_indices()
        .filter_map(|(i, _)| name.get(i..i + 10))
        .find_map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
}

fn sidecar_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().unwrap_or_default().to_os_string();
    name.push(".scans");
    log.with_file_name(name)
}

fn read_sidecar(path: &Path) -> Result<BTreeSet<(NaiveDate, String)>, CliError> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let mut out = BTreeSet::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        let parsed = line.split_once(' ').and_then(|(d, h)| {
            NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .ok()
                .map(|d| (d, h.to_string()))
        });
        match parsed {
            Some(entry) => out.insert(entry),
            None => {
                return Err(CliError::Data(format!(
                    "{} line {}: expected `<date> <sha256>`",
                    path.display(),
                    i + 1
                )))
            }
        };
    }
    Ok(out)
}

fn scanner_to_bim(ctx: &Context) -> Result<RigidTransform, CliError> {
    let cfg = ctx.cfg();
    if let Some(t) = cfg.literal_transform()? {
        return Ok(t);
    }
    let Some(path) = &cfg.correspondences else {
        return Err(CliError::MissingTransform);
    };
    let pairs = read_correspondences_file(&ctx.path(path))?;
    let (src, dst): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(estimate_rigid_transform(&src, &dst)?)
}

fn list_scans(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("xyz" | "ply" | "txt")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn cmd_ingest_scan(
    ctx: &Context,
    scans: &[PathBuf],
    date: Option<NaiveDate>,
) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let scans = if scans.is_empty() {
        list_scans(&ctx.path(&cfg.scans_dir))?
    } else {
        scans.to_vec()
    };
    if scans.is_empty() {
        return Err(CliError::Validation("no scans to ingest".into()));
    }
    if date.is_some() && scans.len() > 1 {
        return Err(CliError::Validation("--date applies to a single scan".into()));
    }
    let transform = scanner_to_bim(ctx)?;
    let bim = load_bim(&ctx.path(&cfg.bim))?;
    if bim.element(&cfg.floor_element).is_none() {
        return Err(CliError::Validation(format!(
            "floor element {:?} is not in the BIM",
            cfg.floor_element
        )));
    }
    let enclosures = bim
        .elements
        .iter()
        .map(|e| build_enclosure(&e.vertices, e.id.clone(), cfg.allowance))
        .collect::<Result<Vec<_>, _>>()?;

    let log = ctx.path(&cfg.metrics_log);
    let sidecar = sidecar_path(&log);
    let mut seen = read_sidecar(&sidecar)?;
    let mut logged: BTreeSet<NaiveDate> = if log.exists() {
        read_metrics_log(&log)?.iter().map(|m| m.capture_date).collect()
    } else {
        BTreeSet::new()
    };
    if let Some(parent) = log.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }

    for scan in &scans {
        let date = match date {
            Some(d) => d,
            None => scan_date_from_name(scan).ok_or_else(|| {
                CliError::Validation(format!(
                    "no YYYY-MM-DD in {}; pass --date",
                    scan.display()
                ))
            })?,
        };
        let bytes = fs::read(scan).map_err(io_err(scan))?;
        let hash = hex::encode(Sha256::digest(&bytes));
        if seen.contains(&(date, hash.clone())) {
            eprintln!("warning: {} ({date}) was already ingested; skipping", scan.display());
            continue;
        }
        if logged.contains(&date) {
            return Err(CliError::Data(format!(
                "metrics for {date} are already logged from a different scan"
            )));
        }
        let cloud = load_point_cloud(scan, CloudFormat::from_path(scan))?.with_capture_date(date);
        let registered = apply_rigid_transform(&cloud, &transform)?;
        let result = classify_points(&registered, &enclosures)?;
        let m = compute_spatial_metrics(&result, &registered, &cfg.floor_element, date)?;
        append_metrics(&log, &m)?;
        let mut side = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&sidecar)
            .map_err(io_err(&sidecar))?;
        std::io::Write::write_all(&mut side, format!("{date} {hash}\n").as_bytes())
            .map_err(io_err(&sidecar))?;
        println!(
            "{date}: utilization_extent {} ({} temporary / {} floor points)",
            m.utilization_extent, m.n_temp, m.n_floor
        );
        seen.insert((date, hash));
        logged.insert(date);
    }
    Ok(())
}

fn load_table(ctx: &Context) -> Result<(Bim4D, FeatureTable), CliError> {
    let cfg = ctx.cfg();
    let bim = load_bim(&ctx.path(&cfg.bim))?;
    let table = read_feature_table_file(&ctx.path(&cfg.features), &bim)?;
    Ok((bim, table))
}

fn load_dataset(ctx: &Context) -> Result<PreparedData, CliError> {
    let cfg = ctx.cfg();
    let (_, table) = load_table(ctx)?;
    Ok(prepare_dataset(&table, cfg.window, cfg.stride, cfg.test_count)?)
}

pub fn cmd_build_features(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let bim = load_bim(&ctx.path(&cfg.bim))?;
    let observations = read_observations_file(&ctx.path(&cfg.observations))?;
    let metrics = read_metrics_log(&ctx.path(&cfg.metrics_log))?;
    let table = build_feature_rows(&observations, &metrics, &bim)?;
    let mut buf = Vec::new();
    write_feature_table(&mut buf, &table)?;
    write_file(&ctx.path(&cfg.features), buf)?;
    let windows = make_table_windows(&table, cfg.window, cfg.stride)?.len();
    println!(
        "feature table: {} rows, {} tasks, {} windows (window {}, stride {})",
        table.row_count(),
        table.series.len(),
        windows,
        cfg.window,
        cfg.stride
    );
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_train(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let data = load_dataset(ctx)?;
    let tc = cfg.train_config();
    let count = param_count_for(tc.units, FEATURE_WIDTH);
    println!(
        "trainable parameters: {} (encoder {}, decoder {}, dense {})",
        format_thousands(count.total),
        format_thousands(count.encoder),
        format_thousands(count.decoder),
        format_thousands(count.dense)
    );
    let (params, report) = fit(&data.split, &tc)?;
    let report = if ctx.fixed_clock.is_some() {
        report.without_timing()
    } else {
        report
    };
    let ck = Checkpoint::new(params, data.scaler, cfg.window, cfg.window);
    let ck_path = ctx.path(&cfg.checkpoint);
    if let Some(parent) = ck_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    save_checkpoint(&ck_path, &ck)?;
    write_file(&ctx.output_dir()?.join(TRAIN_REPORT_FILE), to_json(&report)?)?;
    println!(
        "windows: {} train / {} validation / {} test",
        report.train_windows, report.validation_windows, report.test_windows
    );
    println!(
        "final train mse {:.6} mae {:.6}; test mse {:.6} mae {:.6}",
        report.final_train_mse,
        report.final_train_mae,
        report.test_mse.unwrap_or(f64::NAN),
        report.test_mae.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn cmd_grid_search(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let data = load_dataset(ctx)?;
    let tc = cfg.train_config();
    let result = grid_search(&data.split, &tc, &tc.grid)?;
    let result = if ctx.fixed_clock.is_some() {
        result.without_timing()
    } else {
        result
    };
    write_file(&ctx.output_dir()?.join(GRID_REPORT_FILE), to_json(&result)?)?;
    for c in &result.cells {
        println!(
            "learning_rate {} units {}: val mae {:.6} mse {:.6}",
            c.learning_rate, c.units, c.val_mae, c.val_mse
        );
    }
    println!(
        "best: learning_rate {} units {}",
        result.best_learning_rate, result.best_units
    );
    Ok(())
}

/// Scaled MAE → percentage points of the completion column.
fn pct_span(ck: &Checkpoint) -> f64 {
    ck.scaler.max[PCT_INDEX] - ck.scaler.min[PCT_INDEX]
}

fn band_mae(ctx: &Context, ck: &Checkpoint, table: &FeatureTable) -> Result<BandMae, CliError> {
    let cfg = ctx.cfg();
    let mut mae = match cfg.band_mae {
        Some(m) => BandMae::global(m),
        None => {
            let path = ctx.path(&cfg.output_dir).join(TRAIN_REPORT_FILE);
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "no band_mae configured and no training report at {}",
                    path.display()
                )));
            }
            let report: TrainReport = serde_json::from_str(&read_text(&path)?)?;
            let scaled = report
                .test_mae
                .ok_or_else(|| CliError::Data("training report has no test MAE".into()))?;
            BandMae::global(scaled * pct_span(ck))
        }
    };
    if cfg.per_task_mae {
        let raw = split_dataset(make_table_windows(table, ck.window, cfg.stride)?, cfg.test_count)?;
        let test = scale_windows(&raw.test, &ck.scaler)?;
        let mut by_task: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for w in &test {
            by_task.entry(w.task_id.as_str()).or_default().push(w.clone());
        }
        for (task, windows) in by_task {
            let (_, m) = evaluate(&ck.params, &windows)?;
            mae.per_task.insert(task.to_string(), m * pct_span(ck));
        }
    }
    Ok(mae)
}

fn write_series(
    path: &Path,
    table: &FeatureTable,
    plan: &LookaheadPlan,
    bim: &Bim4D,
) -> Result<(), CliError> {
    let mut out = String::from("task_id,date,actual,planned,median,lower,upper\n");
    for s in &table.series {
        let task = bim.task(&s.task_id)?;
        for r in &s.rows {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},,,",
                s.task_id,
                r.date,
                r.pct,
                round2(task.planned_fraction_at(r.date))
            );
        }
        if let Some(tp) = plan.task(&s.task_id) {
            for b in &tp.bands {
                let _ = writeln!(
                    out,
                    "{},{},,{:.2},{:.2},{:.2},{:.2}",
                    b.task_id, b.date, b.planned, b.median, b.lower, b.upper
                );
            }
        }
    }
    write_file(path, out)
}

pub fn cmd_forecast(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let ck = load_checkpoint(&ctx.path(&cfg.checkpoint))?;
    let (bim, table) = load_table(ctx)?;
    if table.series.is_empty() {
        return Err(CliError::InsufficientHistory("the feature table is empty".into()));
    }
    let window = ck.window;
    let mut predictions = BTreeMap::new();
    let mut last_date: Option<NaiveDate> = None;
    for s in &table.series {
        if s.rows.len() < window {
            return Err(CliError::InsufficientHistory(format!(
                "task {} has {} rows, the model needs {window}",
                s.task_id,
                s.rows.len()
            )));
        }
        let tail = &s.rows[s.rows.len() - window..];
        let mut x = Array2::zeros((window, FEATURE_WIDTH));
        for (i, r) in tail.iter().enumerate() {
            let scaled = ck.scaler.apply(&r.features())?;
            x.row_mut(i).assign(&ArrayView1::from(&scaled[..]));
        }
        predictions.insert(
            s.task_id.clone(),
            predict_horizon(&ck.params, x.view(), &ck.scaler, ck.horizon)?,
        );
        let d = tail[window - 1].date;
        last_date = Some(last_date.map_or(d, |l| l.max(d)));
    }
    let start = last_date
        .and_then(|d| d.succ_opt())
        .ok_or_else(|| CliError::Data("no date after the last observation".into()))?;
    let horizon = horizon_dates(start, ck.horizon, &cfg.calendar());
    let mae = band_mae(ctx, &ck, &table)?;
    let plan = build_lookahead_plan(&predictions, &mae, &bim, &horizon, ctx.today())?;

    let out = ctx.output_dir()?;
    for fmt in [PlanFormat::Csv, PlanFormat::Json, PlanFormat::Markdown] {
        emit_plan(&plan, fmt, &out.join(format!("plan.{}", fmt.extension())))?;
    }
    write_series(&out.join(SERIES_FILE), &table, &plan, &bim)?;
    let at_risk = plan.tasks.iter().filter(|t| t.flag == Flag::AtRisk).count();
    println!(
        "plan {} to {}: {} tasks, {} at risk, band ±{} (written to {})",
        horizon[0],
        horizon[horizon.len() - 1],
        plan.tasks.len(),
        at_risk,
        format_pct(round2(mae.global)),
        out.display()
    );
    Ok(())
}

pub fn cmd_report(ctx: &Context) -> Result<(), CliError> {
    let out_dir = ctx.path(&ctx.cfg().output_dir);
    let train_path = out_dir.join(TRAIN_REPORT_FILE);
    let grid_path = out_dir.join(GRID_REPORT_FILE);
    let plan_path = out_dir.join("plan.json");
    if !train_path.exists() && !grid_path.exists() && !plan_path.exists() {
        return Err(CliError::Data(format!("nothing to report in {}", out_dir.display())));
    }
    let mut md = String::from("# Pipeline report\n");
    if train_path.exists() {
        let r: TrainReport = serde_json::from_str(&read_text(&train_path)?)?;
        let count = param_count_for(r.units, r.input_width);
        let _ = write!(
            md,
            "\n## Training\n\n\
             - units {}, input width {}, trainable parameters {}\n\
             - windows: {} train, {} validation, {} test\n\
             - epochs {}, learning rate {}, seed {}\n\
             - final train MSE {:.6}, MAE {:.6}\n",
            r.units,
            r.input_width,
            format_thousands(count.total),
            r.train_windows,
            r.validation_windows,
            r.test_windows,
            r.epochs.len(),
            r.config.learning_rate,
            r.seed,
            r.final_train_mse,
            r.final_train_mae,
        );
        if let (Some(mse), Some(mae)) = (r.test_mse, r.test_mae) {
            let _ = writeln!(md, "- test MSE {mse:.6}, MAE {mae:.6}");
        }
    }
    if grid_path.exists() {
        let g: GridResult = serde_json::from_str(&read_text(&grid_path)?)?;
        md.push_str("\n## Grid search\n\n| learning rate | units | val MAE | val MSE |\n|---|---|---|---|\n");
        for c in &g.cells {
            let best = c.learning_rate == g.best_learning_rate && c.units == g.best_units;
            let _ = writeln!(
                md,
                "| {}{} | {} | {:.6} | {:.6} |",
                c.learning_rate,
                if best { " (best)" } else { "" },
                c.units,
                c.val_mae,
                c.val_mse
            );
        }
    }
    if plan_path.exists() {
        let plan = plan_from_json(&read_text(&plan_path)?)?;
        md.push('\n');
        md.push_str(&plan_to_markdown(&plan).replacen("# ", "## ", 1));
    }
    write_file(&out_dir.join(REPORT_FILE), &md)?;
    print!("{md}");
    Ok(())
}

pub fn cmd_synth(out: &Path, seed: u64, noise: f64) -> Result<(), CliError> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Validation(format!("noise must be >= 0, got {noise}")));
    }
    let fx = site_fixture(seed)?;
    let progress = if noise > 0.0 {
        let mut spec = site_progress_spec(seed);
        spec.noise = noise;
        gen_progress(&spec)?
    } else {
        fx.progress.clone()
    };
    let scans = out.join("scans");
    fs::create_dir_all(&scans).map_err(io_err(&scans))?;
    save_bim(&fx.bim, &out.join("bim.json"))?;

    let mut buf = Vec::new();
    write_observations(&mut buf, &progress.quantity_observations(&fx.bim)?)?;
    write_file(&out.join("observations.csv"), buf)?;

    for scene in &fx.scenes {
        let cloud = scene.in_scanner_frame(&fx.bim_to_scanner);
        let date = cloud.capture_date.expect("fixture scans are dated");
        save_point_cloud(&cloud, &scans.join(format!("scan_{date}.xyz")), CloudFormat::XyzAscii)?;
    }
    let mut buf = Vec::new();
    write_correspondences(&mut buf, &fx.correspondences)?;
    write_file(&out.join("correspondences.csv"), buf)?;

    let expected: Vec<_> = fx.scenes.iter().map(|s| s.expected.clone()).collect();
    let mut buf = Vec::new();
    write_metrics(&mut buf, &expected)?;
    write_file(&out.join("expected_metrics.csv"), buf)?;

    let config = PipelineConfig {
        correspondences: Some("correspondences.csv".into()),
        epochs: SYNTH_EPOCHS,
        seed,
        ..PipelineConfig::default()
    };
    write_file(&out.join("config.toml"), config.to_toml())?;
    println!(
        "fixture: {} tasks, {} observation dates, {} scans in {}",
        progress.actuals.len(),
        progress.dates.len(),
        fx.scenes.len(),
        out.display()
    );
    Ok(())
}
