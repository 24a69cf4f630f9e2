//! Self-describing JSON checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::params::{GruDirectionParams, GruSeq2SeqParams};
use super::GruError;
use crate::features::{ScalerParams, FEATURE_ORDER};

pub const CHECKPOINT_VERSION: &str = "1";

/// A trained model with everything needed to forecast from raw feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: GruSeq2SeqParams,
    pub scaler: ScalerParams,
    pub window: usize,
    pub horizon: usize,
    pub feature_order: String,
}

impl Checkpoint {
    pub fn new(params: GruSeq2SeqParams, scaler: ScalerParams, window: usize, horizon: usize) -> Self {
        Self {
            params,
            scaler,
            window,
            horizon,
            feature_order: FEATURE_ORDER.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    version: String,
    units: usize,
    input_width: usize,
    window: usize,
    horizon: usize,
    feature_order: String,
    scaler: ScalerParams,
    weights: BTreeMap<String, Tensor>,
}

fn matrix(a: &Array2<f64>) -> Tensor {
    Tensor {
        shape: vec![a.nrows(), a.ncols()],
        data: a.iter().copied().collect(),
    }
}

fn vector(a: &Array1<f64>) -> Tensor {
    Tensor {
        shape: vec![a.len()],
        data: a.to_vec(),
    }
}

fn take(w: &mut BTreeMap<String, Tensor>, key: &str) -> Result<Tensor, GruError> {
    w.remove(key)
        .ok_or_else(|| GruError::Checkpoint(format!("missing tensor {key:?}")))
}

fn to_matrix(t: Tensor, key: &str) -> Result<Array2<f64>, GruError> {
    match t.shape[..] {
        [r, c] => Array2::from_shape_vec((r, c), t.data)
            .map_err(|e| GruError::Checkpoint(format!("{key}: {e}"))),
        _ => Err(GruError::Checkpoint(format!("{key}: expected a matrix, shape {:?}", t.shape))),
    }
}

fn to_vector(t: Tensor, key: &str) -> Result<Array1<f64>, GruError> {
    match t.shape[..] {
        [n] if n == t.data.len() => Ok(Array1::from(t.data)),
        _ => Err(GruError::Checkpoint(format!("{key}: expected a vector, shape {:?}", t.shape))),
    }
}

const DIRECTIONS: [&str; 4] = ["encoder_fw", "encoder_bw", "decoder_fw", "decoder_bw"];

pub fn checkpoint_to_json(c: &Checkpoint) -> Result<String, GruError> {
    let p = &c.params;
    let mut weights = BTreeMap::new();
    for (name, d) in DIRECTIONS
        .iter()
        .zip([&p.encoder_fw, &p.encoder_bw, &p.decoder_fw, &p.decoder_bw])
    {
        weights.insert(format!("{name}.W"), matrix(&d.w));
        weights.insert(format!("{name}.U"), matrix(&d.u));
        weights.insert(format!("{name}.b_in"), vector(&d.b_in));
        weights.insert(format!("{name}.b_rec"), vector(&d.b_rec));
    }
    weights.insert(
        "dense.W".into(),
        Tensor {
            shape: vec![p.dense_w.len(), 1],
            data: p.dense_w.to_vec(),
        },
    );
    weights.insert(
        "dense.b".into(),
        Tensor {
            shape: vec![1],
            data: vec![p.dense_b],
        },
    );
    let doc = Document {
        version: CHECKPOINT_VERSION.into(),
        units: p.units,
        input_width: p.input_width,
        window: c.window,
        horizon: c.horizon,
        feature_order: c.feature_order.clone(),
        scaler: c.scaler.clone(),
        weights,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn checkpoint_from_json(text: &str) -> Result<Checkpoint, GruError> {
    let version: serde_json::Value = serde_json::from_str(text)?;
    match version.get("version").and_then(|v| v.as_str()) {
        Some(CHECKPOINT_VERSION) => {}
        other => {
            return Err(GruError::UnsupportedVersion(
                other.unwrap_or("<missing>").to_string(),
            ))
        }
    }
    let mut doc: Document = serde_json::from_value(version)?;
    let mut direction = |name: &str| -> Result<GruDirectionParams, GruError> {
        let k = |s: &str| format!("{name}.{s}");
        Ok(GruDirectionParams {
            w: to_matrix(take(&mut doc.weights, &k("W"))?, &k("W"))?,
            u: to_matrix(take(&mut doc.weights, &k("U"))?, &k("U"))?,
            b_in: to_vector(take(&mut doc.weights, &k("b_in"))?, &k("b_in"))?,
            b_rec: to_vector(take(&mut doc.weights, &k("b_rec"))?, &k("b_rec"))?,
        })
    };
    let encoder_fw = direction("encoder_fw")?;
    let encoder_bw = direction("encoder_bw")?;
    let decoder_fw = direction("decoder_fw")?;
    let decoder_bw = direction("decoder_bw")?;
    let dense_w = to_matrix(take(&mut doc.weights, "dense.W")?, "dense.W")?;
    if dense_w.ncols() != 1 {
        return Err(GruError::Checkpoint("dense.W must have one column".into()));
    }
    let dense_b = to_vector(take(&mut doc.weights, "dense.b")?, "dense.b")?;
    if dense_b.len() != 1 {
        return Err(GruError::Checkpoint("dense.b must hold one value".into()));
    }
    if let Some(extra) = doc.weights.keys().next() {
        return Err(GruError::Checkpoint(format!("unexpected tensor {extra:?}")));
    }
    let params = GruSeq2SeqParams {
        units: doc.units,
        input_width: doc.input_width,
        encoder_fw,
        encoder_bw,
        decoder_fw,
        decoder_bw,
        dense_w: dense_w.column(0).to_owned(),
        dense_b: dense_b[0],
    };
    params.validate()?;
    if doc.scaler.width() != doc.input_width || doc.scaler.max.len() != doc.input_width {
        return Err(GruError::ScalerMismatch {
            expected: doc.input_width,
            got: doc.scaler.width(),
        });
    }
    if doc.feature_order != FEATURE_ORDER {
        return Err(GruError::Checkpoint(format!(
            "feature order {:?} does not match {:?}",
            doc.feature_order, FEATURE_ORDER
        )));
    }
    Ok(Checkpoint {
        params,
        scaler: doc.scaler,
        window: doc.window,
        horizon: doc.horizon,
        feature_order: doc.feature_order,
    })
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<(), GruError> {
    std::fs::write(path, checkpoint_to_json(c)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, GruError> {
    checkpoint_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fit_scaler;
    use crate::gru::init_params;

    fn sample() -> Checkpoint {
        let mut p = init_params(3, 4, 12).unwrap();
        p.dense_b = 0.1 + 0.2;
        let scaler = fit_scaler(&[vec![0.0; 12], (0..12).map(|i| i as f64 / 3.0).collect()]).unwrap();
        Checkpoint::new(p, scaler, 18, 18)
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let text = checkpoint_to_json(&c).unwrap();
        assert!(text.contains("\"version\": \"1\""));
        assert!(text.contains("\"shape\""));
        assert_eq!(checkpoint_from_json(&text).unwrap(), c);
    }

    #[test]
    fn wrong_version_rejected() {
        let text = checkpoint_to_json(&sample()).unwrap().replace("\"version\": \"1\"", "\"version\": \"0\"");
        assert!(matches!(checkpoint_from_json(&text), Err(GruError::UnsupportedVersion(v)) if v == "0"));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut c = sample();
        c.params.units = 5;
        let text = checkpoint_to_json(&c).unwrap();
        assert!(checkpoint_from_json(&text).is_err());
    }
}
