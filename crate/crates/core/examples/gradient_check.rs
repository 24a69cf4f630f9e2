//! Compares backpropagated gradients with central finite differences on a small model.

use ndarray::{Array2, Array3};
use site_lookahead::gru::{init_params, loss_mse, mse_and_gradients, predict};

fn main() {
    let (units, width, steps, batch) = (4, 3, 3, 2);
    let p = init_params(9, units, width).unwrap();
    let x = Array3::from_shape_fn((batch, steps, width), |(b, t, d)| {
        ((b * 7 + t * 3 + d) as f64 * 0.41).sin()
    });
    let y = Array2::from_shape_fn((batch, steps), |(b, t)| 0.2 + 0.1 * (b + t) as f64);
    let (loss, _, grads) = mse_and_gradients(&p, x.view(), y.view()).unwrap();
    println!("loss {loss:.6}");

    let names = [
        "encoder_fw.W", "encoder_fw.U", "encoder_fw.b_in", "encoder_fw.b_rec",
        "encoder_bw.W", "encoder_bw.U", "encoder_bw.b_in", "encoder_bw.b_rec",
        "decoder_fw.W", "decoder_fw.U", "decoder_fw.b_in", "decoder_fw.b_rec",
        "decoder_bw.W", "decoder_bw.U", "decoder_bw.b_in", "decoder_bw.b_rec",
        "dense.W", "dense.b",
    ];
    let eps = 1e-5;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut q = p.clone();
    for (ti, g) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (k, &a) in g.iter().enumerate() {
            let orig = q.slices()[ti][k];
            q.slices_mut()[ti][k] = orig + eps;
            let lp = loss_mse(predict(&q, x.view(), steps).unwrap().view(), y.view()).unwrap();
            q.slices_mut()[ti][k] = orig - eps;
            let lm = loss_mse(predict(&q, x.view(), steps).unwrap().view(), y.view()).unwrap();
            q.slices_mut()[ti][k] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            let scale = a.abs().max(fd.abs());
            if scale > 1e-8 {
                worst = worst.max((a - fd).abs() / scale);
            }
        }
        println!("{:<18} {:>3} values, worst relative error {:.2e}", names[ti], g.len(), worst);
    }
}
