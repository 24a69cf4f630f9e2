//! Flat TOML pipeline configuration. Relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::calendar::WorkCalendar;
use crate::features::{DEFAULT_TEST_COUNT, DEFAULT_WINDOW};
use crate::geometry::{RigidTransform, DEFAULT_ALLOWANCE};
use crate::gru::{GridSpec, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bim: PathBuf,
    pub observations: PathBuf,
    pub scans_dir: PathBuf,
    /// Append-only metrics CSV; a `<name>.scans` sidecar records ingested scan hashes.
    pub metrics_log: PathBuf,
    pub features: PathBuf,
    pub checkpoint: PathBuf,
    pub output_dir: PathBuf,

    pub allowance: f64,
    pub floor_element: String,
    /// CSV of `sx,sy,sz,dx,dy,dz` scanner/BIM point pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correspondences: Option<PathBuf>,
    /// Scanner-to-BIM transform: row-major rotation (9 values) then translation (3).
    /// Takes precedence over `correspondences`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<Vec<f64>>,

    pub holidays: Vec<NaiveDate>,
    pub window: usize,
    pub stride: usize,
    pub test_count: usize,

    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub units: usize,
    /// `"adam"` or `"sgd"`.
    pub optimizer: String,
    pub grid_learning_rates: Vec<f64>,
    pub grid_units: Vec<usize>,

    /// Band half-width in percentage points; defaults to the trained model's test MAE.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_mae: Option<f64>,
    /// Use each task's own test MAE where it has test windows.
    pub per_task_mae: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            bim: "bim.json".into(),
            observations: "observations.csv".into(),
            scans_dir: "scans".into(),
            metrics_log: "metrics.csv".into(),
            features: "features.csv".into(),
            checkpoint: "model.json".into(),
            output_dir: "out".into(),
            allowance: DEFAULT_ALLOWANCE,
            floor_element: "floor".into(),
            correspondences: None,
            transform: None,
            holidays: Vec::new(),
            window: DEFAULT_WINDOW,
            stride: 1,
            test_count: DEFAULT_TEST_COUNT,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            seed: train.seed,
            units: train.units,
            optimizer: "adam".into(),
            grid_learning_rates: train.grid.learning_rates,
            grid_units: train.grid.units,
            band_mae: None,
            per_task_mae: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let c: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.window == 0 {
            return bad("window must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        if self.test_count == 0 {
            return bad("test_count must be >= 1".into());
        }
        if !(self.allowance >= 0.0 && self.allowance.is_finite()) {
            return bad(format!("allowance must be >= 0, got {}", self.allowance));
        }
        if let Some(t) = &self.transform {
            if t.len() != 12 {
                return bad(format!("transform needs 12 numbers, got {}", t.len()));
            }
        }
        if let Some(m) = self.band_mae {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("band_mae must be >= 0, got {m}"));
            }
        }
        self.optimizer_kind()?;
        self.train_config()
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn optimizer_kind(&self) -> Result<OptimizerKind, CliError> {
        match self.optimizer.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::default()),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(CliError::Validation(format!("unknown optimizer {other:?}"))),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            units: self.units,
            optimizer: self.optimizer_kind().unwrap_or_default(),
            grid: GridSpec {
                learning_rates: self.grid_learning_rates.clone(),
                units: self.grid_units.clone(),
            },
        }
    }

    pub fn calendar(&self) -> WorkCalendar {
        WorkCalendar::new(self.holidays.iter().copied())
    }

    pub fn literal_transform(&self) -> Result<Option<RigidTransform>, CliError> {
        let Some(t) = &self.transform else {
            return Ok(None);
        };
        let r = Matrix3::from_row_slice(&t[..9]);
        let v = Vector3::new(t[9], t[10], t[11]);
        RigidTransform::new(r, v)
            .map(Some)
            .map_err(|e| CliError::Validation(format!("transform: {e}")))
    }
}

/// A config plus the directory its relative paths are anchored to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Ok(Self {
            config: PipelineConfig::from_toml(&text)?,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
