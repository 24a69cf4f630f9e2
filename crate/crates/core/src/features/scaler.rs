//! Per-feature min-max scaling.

use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fits per-column minima and maxima over `rows`.
pub fn fit_scaler<R: AsRef<[f64]>>(rows: &[R]) -> Result<ScalerParams, FeatureError> {
    let first = rows.first().ok_or(FeatureError::EmptyFit)?.as_ref();
    let mut min = first.to_vec();
    let mut max = first.to_vec();
    for row in rows {
        let row = row.as_ref();
        if row.len() != min.len() {
            return Err(FeatureError::WidthMismatch {
                expected: min.len(),
                got: row.len(),
            });
        }
        for (k, &x) in row.iter().enumerate() {
            min[k] = min[k].min(x);
            max[k] = max[k].max(x);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn range(&self, k: usize) -> f64 {
        self.max[k] - self.min[k]
    }

    /// `(x − min) / (max − min)`, or 0 for a constant column. Values outside the fitted
    /// range are not clipped.
    pub fn apply_value(&self, k: usize, x: f64) -> f64 {
        let r = self.range(k);
        if r > 0.0 {
            (x - self.min[k]) / r
        } else {
            0.0
        }
    }

    pub fn invert_value(&self, k: usize, s: f64) -> f64 {
        let r = self.range(k);
        if r > 0.0 {
            s * r + self.min[k]
        } else {
            self.min[k]
        }
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(row)?;
        Ok(row.iter().enumerate().map(|(k, &x)| self.apply_value(k, x)).collect())
    }

    pub fn invert(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(row)?;
        Ok(row.iter().enumerate().map(|(k, &s)| self.invert_value(k, s)).collect())
    }

    fn check(&self, row: &[f64]) -> Result<(), FeatureError> {
        if row.len() != self.width() {
            return Err(FeatureError::WidthMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_map() {
        let s = fit_scaler(&[[0.0], [50.0], [100.0]]).unwrap();
        let out: Vec<f64> = [0.0, 50.0, 100.0].iter().map(|&x| s.apply_value(0, x)).collect();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column() {
        let s = fit_scaler(&[[7.0], [7.0], [7.0]]).unwrap();
        assert_eq!(s.apply(&[7.0]).unwrap(), vec![0.0]);
        assert_eq!(s.invert(&[0.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn empty_fit_and_width_errors() {
        let rows: Vec<[f64; 2]> = vec![];
        assert!(matches!(fit_scaler(&rows), Err(FeatureError::EmptyFit)));
        let s = fit_scaler(&[[0.0, 1.0]]).unwrap();
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn out_of_range_is_not_clipped() {
        let s = fit_scaler(&[[0.0], [10.0]]).unwrap();
        assert_eq!(s.apply_value(0, 15.0), 1.5);
        assert_eq!(s.apply_value(0, -5.0), -0.5);
    }

    proptest! {
        #[test]
        fn invert_apply_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 12), 2..20)
        ) {
            let s = fit_scaler(&rows).unwrap();
            for row in &rows {
                let back = s.invert(&s.apply(row).unwrap()).unwrap();
                for (k, (a, b)) in row.iter().zip(&back).enumerate() {
                    if s.max[k] > s.min[k] {
                        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                    }
                }
            }
        }
    }
}
