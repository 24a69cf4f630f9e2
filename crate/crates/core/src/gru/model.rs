//! Forward pass, backpropagation through time and losses.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayView3, Axis};

use super::params::{GruDirectionParams, GruSeq2SeqParams};
use super::GruError;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intermediates of one step for a batch.
#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    /// `U_h·h_prev + b_rec,h`, the term the reset gate multiplies.
    m: Array2<f64>,
    hh: Array2<f64>,
    h: Array2<f64>,
}

/// `ax` is the input projection `x·W + b_in` for the batch.
fn step(p: &GruDirectionParams, ax: &Array2<f64>, h_prev: Array2<f64>) -> StepCache {
    let u = p.units();
    let ah = h_prev.dot(&p.u) + &p.b_rec;
    let batch = h_prev.nrows();
    let mut z = Array2::zeros((batch, u));
    let mut r = Array2::zeros((batch, u));
    let mut hh = Array2::zeros((batch, u));
    let mut h = Array2::zeros((batch, u));
    let m = ah.slice(s![.., 2 * u..]).to_owned();
    for b in 0..batch {
        for j in 0..u {
            let zj = sigmoid(ax[[b, j]] + ah[[b, j]]);
            let rj = sigmoid(ax[[b, u + j]] + ah[[b, u + j]]);
            let hj = (ax[[b, 2 * u + j]] + rj * m[[b, j]]).tanh();
            z[[b, j]] = zj;
            r[[b, j]] = rj;
            hh[[b, j]] = hj;
            h[[b, j]] = zj * h_prev[[b, j]] + (1.0 - zj) * hj;
        }
    }
    StepCache {
        h_prev,
        z,
        r,
        m,
        hh,
        h,
    }
}

/// One GRU update for a single sample.
pub fn gru_cell_step(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    p: &GruDirectionParams,
) -> Result<Array1<f64>, GruError> {
    if x.len() != p.input_width() || h_prev.len() != p.units() {
        return Err(GruError::Shape(format!(
            "cell expects x of {} and h of {}, got {} and {}",
            p.input_width(),
            p.units(),
            x.len(),
            h_prev.len()
        )));
    }
    let x = x.insert_axis(Axis(0));
    let ax = x.dot(&p.w) + &p.b_in;
    let c = step(p, &ax, h_prev.insert_axis(Axis(0)).to_owned());
    Ok(c.h.row(0).to_owned())
}

/// Inputs of one direction, indexed by time.
enum Inputs<'a> {
    Steps(&'a [Array2<f64>]),
    /// The same input at every step (the repeated encoder state).
    Repeated(&'a Array2<f64>),
}

#[derive(Debug, Clone)]
struct DirectionCache {
    reverse: bool,
    /// In processing order.
    steps: Vec<StepCache>,
}

impl DirectionCache {
    fn output_at(&self, t: usize) -> &Array2<f64> {
        let n = self.steps.len();
        &self.steps[if self.reverse { n - 1 - t } else { t }].h
    }

    fn final_state(&self) -> &Array2<f64> {
        &self.steps.last().expect("at least one step").h
    }
}

fn run_direction(
    p: &GruDirectionParams,
    inputs: &Inputs,
    steps: usize,
    batch: usize,
    reverse: bool,
) -> DirectionCache {
    let project = |x: &Array2<f64>| x.dot(&p.w) + &p.b_in;
    let ax: Vec<Array2<f64>> = match inputs {
        Inputs::Steps(xs) => xs.iter().map(project).collect(),
        Inputs::Repeated(x) => vec![project(x)],
    };
    let mut h = Array2::zeros((batch, p.units()));
    let mut cache = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = if reverse { steps - 1 - k } else { k };
        let a = if ax.len() == 1 { &ax[0] } else { &ax[t] };
        let c = step(p, a, h);
        h = c.h.clone();
        cache.push(c);
    }
    DirectionCache {
        reverse,
        steps: cache,
    }
}

/// Input-side gradients of one direction.
enum InputGrad {
    None,
    Repeated(Array2<f64>),
}

/// `dh_at(t)` is the loss gradient flowing into the output at time `t`. Input gradients are
/// only produced for repeated inputs; the encoder's raw features need none.
fn backprop_direction(
    p: &GruDirectionParams,
    cache: &DirectionCache,
    inputs: &Inputs,
    dh_at: &dyn Fn(usize) -> Option<Array2<f64>>,
    grad: &mut GruDirectionParams,
) -> InputGrad {
    let u = p.units();
    let n = cache.steps.len();
    let batch = cache.steps[0].h.nrows();
    let mut carry: Array2<f64> = Array2::zeros((batch, u));
    let mut gx = Array2::zeros((batch, 3 * u));
    let mut gh = Array2::zeros((batch, 3 * u));
    let mut gx_sum: Option<Array2<f64>> = None;
    for k in (0..n).rev() {
        let t = if cache.reverse { n - 1 - k } else { k };
        let c = &cache.steps[k];
        let mut dh = carry;
        if let Some(ext) = dh_at(t) {
            dh += &ext;
        }
        for b in 0..batch {
            for j in 0..u {
                let (z, r, hh, m) = (c.z[[b, j]], c.r[[b, j]], c.hh[[b, j]], c.m[[b, j]]);
                let d = dh[[b, j]];
                let dz = d * (c.h_prev[[b, j]] - hh);
                let da_h = d * (1.0 - z) * (1.0 - hh * hh);
                let dr = da_h * m;
                let da_z = dz * z * (1.0 - z);
                let da_r = dr * r * (1.0 - r);
                gx[[b, j]] = da_z;
                gx[[b, u + j]] = da_r;
                gx[[b, 2 * u + j]] = da_h;
                gh[[b, j]] = da_z;
                gh[[b, u + j]] = da_r;
                gh[[b, 2 * u + j]] = da_h * r;
            }
        }
        general_mat_mul(1.0, &c.h_prev.t(), &gh, 1.0, &mut grad.u);
        grad.b_rec += &gh.sum_axis(Axis(0));
        grad.b_in += &gx.sum_axis(Axis(0));
        match inputs {
            Inputs::Steps(xs) => {
                general_mat_mul(1.0, &xs[t].t(), &gx, 1.0, &mut grad.w);
            }
            Inputs::Repeated(_) => match gx_sum.as_mut() {
                Some(acc) => *acc += &gx,
                None => gx_sum = Some(gx.clone()),
            },
        }
        carry = &dh * &c.z + gh.dot(&p.u.t());
    }
    match inputs {
        Inputs::Steps(_) => InputGrad::None,
        Inputs::Repeated(x) => {
            let acc = gx_sum.expect("at least one step");
            general_mat_mul(1.0, &x.t(), &acc, 1.0, &mut grad.w);
            InputGrad::Repeated(acc.dot(&p.w.t()))
        }
    }
}

/// Intermediates kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    batch: usize,
    horizon: usize,
    xs: Vec<Array2<f64>>,
    enc_fw: DirectionCache,
    enc_bw: DirectionCache,
    state: Array2<f64>,
    dec_fw: DirectionCache,
    dec_bw: DirectionCache,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Concatenated `[forward, backward]` final encoder states, `B × 2u`.
    pub fn encoder_state(&self) -> &Array2<f64> {
        &self.state
    }

    /// Concatenated decoder outputs at time `t`, `B × 2u`.
    pub fn decoder_output(&self, t: usize) -> Array2<f64> {
        ndarray::concatenate(
            Axis(1),
            &[self.dec_fw.output_at(t).view(), self.dec_bw.output_at(t).view()],
        )
        .expect("matching batch sizes")
    }
}

/// Runs the model on `B × T × d` inputs and returns `B × horizon` predictions (the single
/// linear output unit per timestep).
pub fn forward(
    p: &GruSeq2SeqParams,
    inputs: ArrayView3<f64>,
    horizon: usize,
) -> Result<(Array2<f64>, ForwardCache), GruError> {
    let (batch, steps, width) = inputs.dim();
    if width != p.input_width {
        return Err(GruError::Shape(format!(
            "input width {width} does not match model width {}",
            p.input_width
        )));
    }
    if batch == 0 || steps == 0 || horizon == 0 {
        return Err(GruError::Shape(format!(
            "batch, steps and horizon must be >= 1 (got {batch}, {steps}, {horizon})"
        )));
    }
    let xs: Vec<Array2<f64>> = (0..steps)
        .map(|t| inputs.index_axis(Axis(1), t).to_owned())
        .collect();
    let enc_fw = run_direction(&p.encoder_fw, &Inputs::Steps(&xs), steps, batch, false);
    let enc_bw = run_direction(&p.encoder_bw, &Inputs::Steps(&xs), steps, batch, true);
    let state = ndarray::concatenate(
        Axis(1),
        &[enc_fw.final_state().view(), enc_bw.final_state().view()],
    )
    .expect("matching batch sizes");
    let dec_fw = run_direction(&p.decoder_fw, &Inputs::Repeated(&state), horizon, batch, false);
    let dec_bw = run_direction(&p.decoder_bw, &Inputs::Repeated(&state), horizon, batch, true);
    let u = p.units;
    let w_fw = p.dense_w.slice(s![..u]);
    let w_bw = p.dense_w.slice(s![u..]);
    let mut preds = Array2::zeros((batch, horizon));
    for t in 0..horizon {
        let y = dec_fw.output_at(t).dot(&w_fw) + dec_bw.output_at(t).dot(&w_bw) + p.dense_b;
        preds.column_mut(t).assign(&y);
    }
    let cache = ForwardCache {
        fingerprint: p.fingerprint(),
        batch,
        horizon,
        xs,
        enc_fw,
        enc_bw,
        state,
        dec_fw,
        dec_bw,
    };
    Ok((preds, cache))
}

/// Predictions only.
pub fn predict(p: &GruSeq2SeqParams, inputs: ArrayView3<f64>, horizon: usize) -> Result<Array2<f64>, GruError> {
    forward(p, inputs, horizon).map(|(y, _)| y)
}

/// Gradients of a scalar loss with respect to every parameter, given `d_pred`, the loss
/// gradient with respect to the `B × horizon` predictions.
pub fn backward(
    p: &GruSeq2SeqParams,
    cache: &ForwardCache,
    d_pred: ArrayView2<f64>,
) -> Result<GruSeq2SeqParams, GruError> {
    if cache.fingerprint != p.fingerprint() {
        return Err(GruError::StaleCache);
    }
    if d_pred.dim() != (cache.batch, cache.horizon) {
        return Err(GruError::Shape(format!(
            "upstream gradient {:?} does not match predictions ({}, {})",
            d_pred.dim(),
            cache.batch,
            cache.horizon
        )));
    }
    let u = p.units;
    let mut g = p.zeros_like();
    g.dense_b = d_pred.sum();
    for t in 0..cache.horizon {
        let dy = d_pred.column(t);
        let mut gw = g.dense_w.slice_mut(s![..u]);
        gw += &cache.dec_fw.output_at(t).t().dot(&dy);
        let mut gw = g.dense_w.slice_mut(s![u..]);
        gw += &cache.dec_bw.output_at(t).t().dot(&dy);
    }
    let outer = |w: ArrayView1<f64>, t: usize| -> Array2<f64> {
        let dy = d_pred.column(t).insert_axis(Axis(1));
        dy.dot(&w.insert_axis(Axis(0)))
    };
    let w_fw = p.dense_w.slice(s![..u]);
    let w_bw = p.dense_w.slice(s![u..]);
    let state = Inputs::Repeated(&cache.state);
    let d_state_fw = backprop_direction(
        &p.decoder_fw,
        &cache.dec_fw,
        &state,
        &|t| Some(outer(w_fw, t)),
        &mut g.decoder_fw,
    );
    let d_state_bw = backprop_direction(
        &p.decoder_bw,
        &cache.dec_bw,
        &state,
        &|t| Some(outer(w_bw, t)),
        &mut g.decoder_bw,
    );
    let d_state = match (d_state_fw, d_state_bw) {
        (InputGrad::Repeated(a), InputGrad::Repeated(b)) => a + b,
        _ => unreachable!("repeated inputs yield a repeated gradient"),
    };
    let steps = cache.xs.len();
    let d_fw_final = d_state.slice(s![.., ..u]).to_owned();
    let d_bw_final = d_state.slice(s![.., u..]).to_owned();
    let xs = Inputs::Steps(&cache.xs);
    // The forward encoder ends at time T−1, the backward one at time 0.
    backprop_direction(
        &p.encoder_fw,
        &cache.enc_fw,
        &xs,
        &|t| (t == steps - 1).then(|| d_fw_final.clone()),
        &mut g.encoder_fw,
    );
    backprop_direction(
        &p.encoder_bw,
        &cache.enc_bw,
        &xs,
        &|t| (t == 0).then(|| d_bw_final.clone()),
        &mut g.encoder_bw,
    );
    Ok(g)
}

fn check_same(pred: &ArrayView2<f64>, target: &ArrayView2<f64>) -> Result<(), GruError> {
    if pred.dim() != target.dim() || pred.is_empty() {
        return Err(GruError::Shape(format!(
            "prediction {:?} and target {:?} must be equal and non-empty",
            pred.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// Mean of squared differences over all elements.
pub fn loss_mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64, GruError> {
    check_same(&pred, &target)?;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Mean of absolute differences over all elements.
pub fn metric_mae(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64, GruError> {
    check_same(&pred, &target)?;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// `∂MSE/∂pred = 2·(pred − target) / N`.
pub fn mse_gradient(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<Array2<f64>, GruError> {
    check_same(&pred, &target)?;
    let n = pred.len() as f64;
    Ok((&pred - &target) * (2.0 / n))
}

/// Loss and gradients for one batch.
pub fn mse_and_gradients(
    p: &GruSeq2SeqParams,
    inputs: ArrayView3<f64>,
    targets: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, GruSeq2SeqParams), GruError> {
    let (pred, cache) = forward(p, inputs, targets.ncols())?;
    let loss = loss_mse(pred.view(), targets)?;
    let d = mse_gradient(pred.view(), targets)?;
    let g = backward(p, &cache, d.view())?;
    Ok((loss, pred, g))
}
