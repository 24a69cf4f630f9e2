//! Parameter update rules.

use serde::{Deserialize, Serialize};

use super::params::GruSeq2SeqParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Optimizer with its running moments.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &GruSeq2SeqParams) -> Self {
        let zeros: Vec<Vec<f64>> = match kind {
            OptimizerKind::Adam { .. } => params.slices().iter().map(|s| vec![0.0; s.len()]).collect(),
            OptimizerKind::Sgd => Vec::new(),
        };
        Self {
            kind,
            learning_rate,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut GruSeq2SeqParams, grads: &GruSeq2SeqParams) {
        let lr = self.learning_rate;
        let gs = grads.slices();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.slices_mut().into_iter().zip(gs) {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params
                    .slices_mut()
                    .into_iter()
                    .zip(gs)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] -= lr * mh / (vh.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::init_params;

    #[test]
    fn sgd_step() {
        let mut p = init_params(1, 2, 1).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.dense_b = 2.0;
        Optimizer::new(OptimizerKind::Sgd, 0.1, &p).step(&mut p, &g);
        assert!((p.dense_b - (before.dense_b - 0.2)).abs() < 1e-15);
        assert_eq!(p.encoder_fw, before.encoder_fw);
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut p = init_params(1, 2, 1).unwrap();
        let mut g = p.zeros_like();
        g.dense_b = 3.0;
        g.dense_w[0] = -0.5;
        let before = p.clone();
        let mut opt = Optimizer::new(OptimizerKind::default(), 0.01, &p);
        opt.step(&mut p, &g);
        assert!((p.dense_b - before.dense_b + 0.01).abs() < 1e-8);
        assert!((p.dense_w[0] - before.dense_w[0] - 0.01).abs() < 1e-8);
        assert_eq!(p.dense_w[1], before.dense_w[1]);
    }
}
