use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zw: Vec<Array2<f64>> = net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let zb: Vec<Array1<f64>> = net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m_w: zw.clone(), v_w: zw, m_b: zb.clone(), v_b: zb }
    }
}

fn update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, st: (f64, f64, f64, f64, f64, f64)) {
    let (lr, b1, b2, eps, c1, c2) = st;
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
}

/// One Adam descent step on `net` with bias-corrected moments.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    let st = (
        state.lr,
        state.beta1,
        state.beta2,
        state.eps,
        1.0 - state.beta1.powi(t),
        1.0 - state.beta2.powi(t),
    );
    for l in 0..net.weights.len() {
        ndarray::Zip::from(&mut net.weights[l])
            .and(&grads.weights[l])
            .and(&mut state.m_w[l])
            .and(&mut state.v_w[l])
            .for_each(|p, &g, m, v| update(p, g, m, v, st));
        ndarray::Zip::from(&mut net.biases[l])
            .and(&grads.biases[l])
            .and(&mut state.m_b[l])
            .and(&mut state.v_b[l])
            .for_each(|p, &g, m, v| update(p, g, m, v, st));
    }
}

/// `target ← τ·online + (1 − τ)·target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (t, &o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}
