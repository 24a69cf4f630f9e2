//! Parameter containers, initialization and counting.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::GruError;

/// Weights of one GRU direction. Column blocks of every kernel and bias are ordered
/// `[update z | reset r | candidate h̃]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruDirectionParams {
    /// Input kernel, `d × 3u`.
    pub w: Array2<f64>,
    /// Recurrent kernel, `u × 3u`.
    pub u: Array2<f64>,
    pub b_in: Array1<f64>,
    pub b_rec: Array1<f64>,
}

impl GruDirectionParams {
    pub fn zeros(input_width: usize, units: usize) -> Self {
        Self {
            w: Array2::zeros((input_width, 3 * units)),
            u: Array2::zeros((units, 3 * units)),
            b_in: Array1::zeros(3 * units),
            b_rec: Array1::zeros(3 * units),
        }
    }

    pub fn units(&self) -> usize {
        self.u.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b_in.len() + self.b_rec.len()
    }

    pub(crate) fn check_shapes(&self, input_width: usize, units: usize) -> Result<(), GruError> {
        let ok = self.w.dim() == (input_width, 3 * units)
            && self.u.dim() == (units, 3 * units)
            && self.b_in.len() == 3 * units
            && self.b_rec.len() == 3 * units;
        if ok {
            Ok(())
        } else {
            Err(GruError::Shape(format!(
                "direction expects W {input_width}x{}, U {units}x{}, biases {}; got W {:?}, U {:?}, biases {}/{}",
                3 * units,
                3 * units,
                3 * units,
                self.w.dim(),
                self.u.dim(),
                self.b_in.len(),
                self.b_rec.len()
            )))
        }
    }

    fn slices(&self) -> [&[f64]; 4] {
        [
            standard(self.w.as_slice()),
            standard(self.u.as_slice()),
            standard(self.b_in.as_slice()),
            standard(self.b_rec.as_slice()),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            standard(self.w.as_slice_mut()),
            standard(self.u.as_slice_mut()),
            standard(self.b_in.as_slice_mut()),
            standard(self.b_rec.as_slice_mut()),
        ]
    }
}

fn standard<T>(s: Option<T>) -> T {
    s.expect("parameter arrays are kept in standard layout")
}

/// Bidirectional encoder, repeat stage, bidirectional decoder and a per-timestep linear head.
/// The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GruSeq2SeqParams {
    pub units: usize,
    pub input_width: usize,
    pub encoder_fw: GruDirectionParams,
    pub encoder_bw: GruDirectionParams,
    /// Decoder directions read the `2u` encoder state.
    pub decoder_fw: GruDirectionParams,
    pub decoder_bw: GruDirectionParams,
    /// `2u` weights over the concatenated decoder outputs.
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub encoder: usize,
    pub decoder: usize,
    pub dense: usize,
    pub total: usize,
}

impl ParamCount {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.encoder, self.decoder, self.dense, self.total)
    }
}

/// Counts from shapes alone: `3·(d·u + u² + 2u)` per direction.
pub fn param_count_for(units: usize, input_width: usize) -> ParamCount {
    let direction = |d: usize| 3 * (d * units + units * units + 2 * units);
    let encoder = 2 * direction(input_width);
    let decoder = 2 * direction(2 * units);
    let dense = 2 * units + 1;
    ParamCount {
        encoder,
        decoder,
        dense,
        total: encoder + decoder + dense,
    }
}

pub fn param_count(p: &GruSeq2SeqParams) -> ParamCount {
    let encoder = p.encoder_fw.param_count() + p.encoder_bw.param_count();
    let decoder = p.decoder_fw.param_count() + p.decoder_bw.param_count();
    let dense = p.dense_w.len() + 1;
    ParamCount {
        encoder,
        decoder,
        dense,
        total: encoder + decoder + dense,
    }
}

impl GruSeq2SeqParams {
    pub fn zeros(units: usize, input_width: usize) -> Self {
        Self {
            units,
            input_width,
            encoder_fw: GruDirectionParams::zeros(input_width, units),
            encoder_bw: GruDirectionParams::zeros(input_width, units),
            decoder_fw: GruDirectionParams::zeros(2 * units, units),
            decoder_bw: GruDirectionParams::zeros(2 * units, units),
            dense_w: Array1::zeros(2 * units),
            dense_b: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.units, self.input_width)
    }

    pub fn validate(&self) -> Result<(), GruError> {
        if self.units == 0 || self.input_width == 0 {
            return Err(GruError::Shape("units and input width must be >= 1".into()));
        }
        self.encoder_fw.check_shapes(self.input_width, self.units)?;
        self.encoder_bw.check_shapes(self.input_width, self.units)?;
        self.decoder_fw.check_shapes(2 * self.units, self.units)?;
        self.decoder_bw.check_shapes(2 * self.units, self.units)?;
        if self.dense_w.len() != 2 * self.units {
            return Err(GruError::Shape(format!(
                "dense weights expect {} entries, got {}",
                2 * self.units,
                self.dense_w.len()
            )));
        }
        if !self.is_finite() {
            return Err(GruError::NonFinite);
        }
        Ok(())
    }

    /// Every tensor as a flat slice, in a fixed order shared with [`Self::slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(18);
        for d in [&self.encoder_fw, &self.encoder_bw, &self.decoder_fw, &self.decoder_bw] {
            out.extend(d.slices());
        }
        out.push(standard(self.dense_w.as_slice()));
        out.push(std::slice::from_ref(&self.dense_b));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(18);
        for d in [
            &mut self.encoder_fw,
            &mut self.encoder_bw,
            &mut self.decoder_fw,
            &mut self.decoder_bw,
        ] {
            out.extend(d.slices_mut());
        }
        out.push(standard(self.dense_w.as_slice_mut()));
        out.push(std::slice::from_mut(&mut self.dense_b));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub(crate) fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in self.slices() {
            for v in s {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Glorot-uniform input kernels, per-gate orthogonal recurrent blocks, zero biases.
pub fn init_params(seed: u64, units: usize, input_width: usize) -> Result<GruSeq2SeqParams, GruError> {
    if units == 0 || input_width == 0 {
        return Err(GruError::InvalidConfig(
            "units and input width must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction = |d: usize| GruDirectionParams {
        w: glorot_uniform(&mut rng, d, 3 * units),
        u: orthogonal_blocks(&mut rng, units),
        b_in: Array1::zeros(3 * units),
        b_rec: Array1::zeros(3 * units),
    };
    let encoder_fw = direction(input_width);
    let encoder_bw = direction(input_width);
    let decoder_fw = direction(2 * units);
    let decoder_bw = direction(2 * units);
    let dense = glorot_uniform(&mut rng, 2 * units, 1);
    Ok(GruSeq2SeqParams {
        units,
        input_width,
        encoder_fw,
        encoder_bw,
        decoder_fw,
        decoder_bw,
        dense_w: dense.column(0).to_owned(),
        dense_b: 0.0,
    })
}

fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit))
}

/// Three independent `u × u` orthogonal blocks side by side.
fn orthogonal_blocks(rng: &mut ChaCha8Rng, units: usize) -> Array2<f64> {
    let mut out = Array2::zeros((units, 3 * units));
    for g in 0..3 {
        let a = DMatrix::<f64>::from_fn(units, units, |_, _| rng.sample(StandardNormal));
        let qr = a.qr();
        let mut q = qr.q();
        let r = qr.r();
        // Sign fix makes the draw uniform over the orthogonal group.
        for j in 0..units {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        for i in 0..units {
            for j in 0..units {
                out[[i, g * units + j]] = q[(i, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;

    #[test]
    fn reference_counts() {
        let p = init_params(42, 64, 12).unwrap();
        assert_eq!(param_count(&p).as_tuple(), (29_952, 74_496, 129, 104_577));
        assert_eq!(param_count_for(64, 12), param_count(&p));
    }

    #[test]
    fn unit_counts() {
        assert_eq!(param_count_for(1, 1).as_tuple(), (24, 30, 3, 57));
        let p = init_params(0, 1, 1).unwrap();
        assert_eq!(param_count(&p).as_tuple(), (24, 30, 3, 57));
    }

    #[test]
    fn slices_cover_every_parameter() {
        let p = init_params(1, 5, 3).unwrap();
        let n: usize = p.slices().iter().map(|s| s.len()).sum();
        assert_eq!(n, param_count(&p).total);
    }

    #[test]
    fn deterministic_init() {
        assert_eq!(init_params(7, 8, 12).unwrap(), init_params(7, 8, 12).unwrap());
        assert_ne!(init_params(7, 8, 12).unwrap(), init_params(8, 8, 12).unwrap());
    }

    #[test]
    fn recurrent_blocks_are_orthogonal() {
        let p = init_params(42, 16, 12).unwrap();
        for d in [&p.encoder_fw, &p.encoder_bw, &p.decoder_fw, &p.decoder_bw] {
            for g in 0..3 {
                let q = d.u.slice(s![.., g * 16..(g + 1) * 16]);
                let qtq = q.t().dot(&q);
                for i in 0..16 {
                    for j in 0..16 {
                        let e = if i == j { 1.0 } else { 0.0 };
                        assert!((qtq[[i, j]] - e).abs() < 1e-9);
                    }
                }
            }
            assert!(d.b_in.iter().chain(d.b_rec.iter()).all(|&b| b == 0.0));
        }
    }

    #[test]
    fn glorot_limits() {
        let p = init_params(3, 64, 12).unwrap();
        let limit = (6.0 / (12.0 + 192.0f64)).sqrt();
        assert!(p.encoder_fw.w.iter().all(|v| v.abs() <= limit));
        let limit = (6.0 / (128.0 + 1.0f64)).sqrt();
        assert!(p.dense_w.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(init_params(0, 0, 12).is_err());
        assert!(init_params(0, 4, 0).is_err());
    }
}
