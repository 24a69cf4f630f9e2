//! Mini-batch training, evaluation and grid search.

use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{loss_mse, metric_mae, mse_and_gradients, predict};
use super::optim::{Optimizer, OptimizerKind};
use super::params::{init_params, GruSeq2SeqParams};
use super::GruError;
use crate::features::{DatasetSplit, FeatureWindow, ScalerParams, PCT_INDEX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub units: usize,
    pub optimizer: OptimizerKind,
    pub grid: GridSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 8,
            seed: 42,
            units: 64,
            optimizer: OptimizerKind::default(),
            grid: GridSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GruError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GruError::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(GruError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GruError::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.units == 0 {
            return Err(GruError::InvalidConfig("units must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub units: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.01, 0.001, 0.0001],
            units: vec![16, 32, 64],
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> Vec<(f64, usize)> {
        self.learning_rates
            .iter()
            .flat_map(|&lr| self.units.iter().map(move |&u| (lr, u)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Running mean over the epoch's mini-batches, before each update.
    pub train_mse: f64,
    pub train_mae: f64,
    pub val_mse: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub units: usize,
    pub input_width: usize,
    pub train_windows: usize,
    pub validation_windows: usize,
    pub test_windows: usize,
    pub epochs: Vec<EpochMetrics>,
    /// Full pass over the training windows with the final parameters.
    pub final_train_mse: f64,
    pub final_train_mae: f64,
    pub test_mse: Option<f64>,
    pub test_mae: Option<f64>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Copy with the wall time zeroed, for byte-comparable reports.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn last_epoch(&self) -> &EpochMetrics {
        self.epochs.last().expect("at least one epoch")
    }
}

/// Stacks windows into `N × T × d` inputs and `N × H` targets.
pub fn stack_windows(windows: &[FeatureWindow]) -> Result<(Array3<f64>, Array2<f64>), GruError> {
    let first = windows
        .first()
        .ok_or_else(|| GruError::EmptySplit("no windows to stack".into()))?;
    let (t, d) = first.inputs.dim();
    let h = first.targets.len();
    let mut x = Array3::zeros((windows.len(), t, d));
    let mut y = Array2::zeros((windows.len(), h));
    for (i, w) in windows.iter().enumerate() {
        if w.inputs.dim() != (t, d) || w.targets.len() != h {
            return Err(GruError::Shape(format!(
                "window {i} has shape {:?}/{}, expected ({t}, {d})/{h}",
                w.inputs.dim(),
                w.targets.len()
            )));
        }
        x.index_axis_mut(Axis(0), i).assign(&w.inputs);
        y.row_mut(i).assign(&w.targets);
    }
    Ok((x, y))
}

const EVAL_CHUNK: usize = 64;

/// Predictions for every window, in chunks.
pub fn predict_all(p: &GruSeq2SeqParams, x: &Array3<f64>, horizon: usize) -> Result<Array2<f64>, GruError> {
    let mut out = Array2::zeros((x.len_of(Axis(0)), horizon));
    let n = x.len_of(Axis(0));
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let y = predict(p, x.slice(ndarray::s![start..end, .., ..]), horizon)?;
        out.slice_mut(ndarray::s![start..end, ..]).assign(&y);
        start = end;
    }
    Ok(out)
}

/// `(mse, mae)` over the given windows.
pub fn evaluate(p: &GruSeq2SeqParams, windows: &[FeatureWindow]) -> Result<(f64, f64), GruError> {
    let (x, y) = stack_windows(windows)?;
    eval_stacked(p, &x, &y)
}

fn eval_stacked(p: &GruSeq2SeqParams, x: &Array3<f64>, y: &Array2<f64>) -> Result<(f64, f64), GruError> {
    let pred = predict_all(p, x, y.ncols())?;
    Ok((loss_mse(pred.view(), y.view())?, metric_mae(pred.view(), y.view())?))
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub(crate) fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trains `params` in place of a fresh initialization; batch order is derived from the seed.
pub fn train(
    mut params: GruSeq2SeqParams,
    splits: &DatasetSplit,
    config: &TrainConfig,
) -> Result<(GruSeq2SeqParams, TrainReport), GruError> {
    config.validate()?;
    params.validate()?;
    if splits.train.is_empty() || splits.validation.is_empty() {
        return Err(GruError::EmptySplit(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let clock = Instant::now();
    let (x, y) = stack_windows(&splits.train)?;
    let (xv, yv) = stack_windows(&splits.validation)?;
    if x.len_of(Axis(2)) != params.input_width {
        return Err(GruError::Shape(format!(
            "windows have {} features, model expects {}",
            x.len_of(Axis(2)),
            params.input_width
        )));
    }
    let n = x.len_of(Axis(0));
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed));
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &params);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut se, mut ae) = (0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let (loss, pred, grads) = mse_and_gradients(&params, xb.view(), yb.view())?;
            if !loss.is_finite() {
                return Err(GruError::Diverged { epoch });
            }
            let cells = yb.len() as f64;
            se += loss * cells;
            ae += metric_mae(pred.view(), yb.view())? * cells;
            opt.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(GruError::Diverged { epoch });
            }
        }
        let (val_mse, val_mae) = eval_stacked(&params, &xv, &yv)?;
        if !(val_mse.is_finite() && val_mae.is_finite()) {
            return Err(GruError::Diverged { epoch });
        }
        let cells = y.len() as f64;
        epochs.push(EpochMetrics {
            epoch,
            train_mse: se / cells,
            train_mae: ae / cells,
            val_mse,
            val_mae,
        });
    }
    let (final_train_mse, final_train_mae) = eval_stacked(&params, &x, &y)?;
    let (test_mse, test_mae) = if splits.test.is_empty() {
        (None, None)
    } else {
        let (m, a) = evaluate(&params, &splits.test)?;
        (Some(m), Some(a))
    };
    let report = TrainReport {
        seed: config.seed,
        config: config.clone(),
        units: params.units,
        input_width: params.input_width,
        train_windows: splits.train.len(),
        validation_windows: splits.validation.len(),
        test_windows: splits.test.len(),
        epochs,
        final_train_mse,
        final_train_mae,
        test_mse,
        test_mae,
        wall_time_secs: clock.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

/// Initializes from `config.seed` / `config.units` and trains.
pub fn fit(splits: &DatasetSplit, config: &TrainConfig) -> Result<(GruSeq2SeqParams, TrainReport), GruError> {
    config.validate()?;
    let width = splits
        .train
        .first()
        .map(|w| w.inputs.ncols())
        .ok_or_else(|| GruError::EmptySplit("training split is empty".into()))?;
    train(init_params(config.seed, config.units, width)?, splits, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub units: usize,
    pub seed: u64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_learning_rate: f64,
    pub best_units: usize,
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.cells {
            c.report.wall_time_secs = 0.0;
        }
        out
    }
}

/// Seed of one grid cell, independent of grid order.
pub fn cell_seed(master: u64, learning_rate: f64, units: usize) -> u64 {
    mix_seed(master ^ mix_seed(learning_rate.to_bits() ^ mix_seed(units as u64)))
}

/// Trains one model per `(learning_rate, units)` cell in parallel and picks the lowest final
/// validation MAE, then validation MSE, then fewer units.
pub fn grid_search(
    splits: &DatasetSplit,
    base: &TrainConfig,
    grid: &GridSpec,
) -> Result<GridResult, GruError> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(GruError::EmptyGrid);
    }
    let results: Vec<Result<GridCell, GruError>> = cells
        .par_iter()
        .map(|&(learning_rate, units)| {
            let seed = cell_seed(base.seed, learning_rate, units);
            let config = TrainConfig {
                learning_rate,
                units,
                seed,
                ..base.clone()
            };
            let (_, report) = fit(splits, &config)?;
            let last = *report.last_epoch();
            Ok(GridCell {
                learning_rate,
                units,
                seed,
                val_mse: last.val_mse,
                val_mae: last.val_mae,
                report,
            })
        })
        .collect();
    let cells: Vec<GridCell> = results.into_iter().collect::<Result<_, _>>()?;
    let best = cells
        .iter()
        .min_by(|a, b| {
            a.val_mae
                .total_cmp(&b.val_mae)
                .then(a.val_mse.total_cmp(&b.val_mse))
                .then(a.units.cmp(&b.units))
        })
        .expect("non-empty grid");
    Ok(GridResult {
        best_learning_rate: best.learning_rate,
        best_units: best.units,
        cells,
    })
}

/// Forecast for one scaled `T × d` window, inverted to percentages and clamped to `[0, 100]`.
pub fn predict_horizon(
    p: &GruSeq2SeqParams,
    latest_window: ArrayView2<f64>,
    scaler: &ScalerParams,
    horizon: usize,
) -> Result<Vec<f64>, GruError> {
    if scaler.width() != p.input_width || latest_window.ncols() != p.input_width {
        return Err(GruError::ScalerMismatch {
            expected: p.input_width,
            got: if scaler.width() != p.input_width {
                scaler.width()
            } else {
                latest_window.ncols()
            },
        });
    }
    let x = latest_window.insert_axis(Axis(0));
    let y = predict(p, x, horizon)?;
    Ok(y
        .row(0)
        .iter()
        .map(|&s| scaler.invert_value(PCT_INDEX, s).clamp(0.0, 100.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fit_scaler;
    use chrono::NaiveDate;
    use ndarray::Array1;

    fn toy_windows(n: usize, t: usize, d: usize) -> Vec<FeatureWindow> {
        let day0 = NaiveDate::from_ymd_opt(2022, 2, 2).unwrap();
        (0..n)
            .map(|i| {
                let phase = i as f64 / n as f64;
                let inputs = Array2::from_shape_fn((t, d), |(k, j)| {
                    ((k as f64 * 0.3 + phase * 3.0 + j as f64).sin() + 1.0) / 2.0
                });
                let targets = Array1::from_shape_fn(t, |k| 0.2 + 0.6 * (phase + k as f64 / (4.0 * t as f64)));
                FeatureWindow {
                    task_id: "t".into(),
                    anchor_date: day0 + chrono::Days::new(i as u64),
                    inputs,
                    targets,
                    target_dates: vec![day0; t],
                }
            })
            .collect()
    }

    fn toy_split() -> DatasetSplit {
        let w = toy_windows(14, 6, 3);
        DatasetSplit {
            train: w[..10].to_vec(),
            validation: w[10..12].to_vec(),
            test: w[12..].to_vec(),
        }
    }

    #[test]
    fn config_guards() {
        let split = toy_split();
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            assert!(matches!(fit(&split, &bad), Err(GruError::InvalidConfig(_))));
        }
        let empty = DatasetSplit {
            validation: vec![],
            ..split
        };
        assert!(fit(&empty, &TrainConfig { units: 2, epochs: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let split = toy_split();
        let cfg = TrainConfig {
            units: 4,
            epochs: 30,
            learning_rate: 0.01,
            batch_size: 4,
            ..Default::default()
        };
        let (p1, r1) = fit(&split, &cfg).unwrap();
        let (p2, r2) = fit(&split, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.without_timing(), r2.without_timing());
        assert_eq!(r1.epochs.len(), 30);
        assert!(r1.epochs[29].train_mse < r1.epochs[0].train_mse);
        assert!(r1.test_mse.unwrap() >= 0.0);
    }

    #[test]
    fn huge_learning_rate_diverges_or_stays_finite() {
        let split = toy_split();
        let cfg = TrainConfig {
            units: 3,
            epochs: 3,
            learning_rate: 1e300,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        match fit(&split, &cfg) {
            Err(GruError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn singleton_grid() {
        let split = toy_split();
        let base = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let grid = GridSpec {
            learning_rates: vec![0.001],
            units: vec![4],
        };
        let r = grid_search(&split, &base, &grid).unwrap();
        assert_eq!((r.best_learning_rate, r.best_units), (0.001, 4));
        assert_eq!(r.cells.len(), 1);
        let empty = GridSpec {
            learning_rates: vec![],
            units: vec![4],
        };
        assert!(matches!(grid_search(&split, &base, &empty), Err(GruError::EmptyGrid)));
    }

    #[test]
    fn grid_is_reproducible() {
        let split = toy_split();
        let base = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let grid = GridSpec {
            learning_rates: vec![0.01, 0.001],
            units: vec![2, 3],
        };
        let a = grid_search(&split, &base, &grid).unwrap();
        let b = grid_search(&split, &base, &grid).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.cells.len(), 4);
    }

    #[test]
    fn horizon_clamping() {
        let scaler = fit_scaler(&[vec![0.0; 12], vec![100.0; 12]]).unwrap();
        let mut p = GruSeq2SeqParams::zeros(2, 12);
        let w = Array2::zeros((18, 12));
        p.dense_b = 0.79;
        let y = predict_horizon(&p, w.view(), &scaler, 18).unwrap();
        assert_eq!(y.len(), 18);
        assert!(y.iter().all(|v| (v - 79.0).abs() < 1e-9));
        p.dense_b = 1.10;
        assert!(predict_horizon(&p, w.view(), &scaler, 18).unwrap().iter().all(|&v| v == 100.0));
        p.dense_b = -0.05;
        assert!(predict_horizon(&p, w.view(), &scaler, 18).unwrap().iter().all(|&v| v == 0.0));
        let narrow = fit_scaler(&[vec![0.0; 11]]).unwrap();
        assert!(matches!(
            predict_horizon(&p, w.view(), &narrow, 18),
            Err(GruError::ScalerMismatch { .. })
        ));
    }
}
