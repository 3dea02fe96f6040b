//! Small fully connected networks with hand-written backpropagation.
//!
//! Inputs are batches with one sample per row. Hidden layers use ReLU.

mod checkpoint;
mod loss;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{huber, huber_masked, mse, mse_masked};
pub use optim::{adam_step, soft_update, AdamState};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("expected input width {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Tanh,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    /// `weights[l]` has shape `(dims[l], dims[l + 1])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub output: OutputActivation,
}

/// Activations saved by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flat_map(|b| b.iter()))
    }
}

impl Mlp {
    /// Uniform initialization in `±sqrt(1 / fan_in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least an input and an output layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let bound = (1.0 / dims[l] as f64).sqrt();
            weights.push(Array2::from_shape_fn((dims[l], dims[l + 1]), |_| rng.random_range(-bound..=bound)));
            biases.push(Array1::from_shape_fn(dims[l + 1], |_| rng.random_range(-bound..=bound)));
        }
        Mlp { dims: dims.to_vec(), weights, biases, output }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flat_map(|b| b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().flat_map(|w| w.iter_mut()).chain(self.biases.iter_mut().flat_map(|b| b.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Cache, NeuralError> {
        if input.ncols() != self.input_dim() {
            return Err(NeuralError::Dimension { expected: self.input_dim(), got: input.ncols() });
        }
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut x = input.to_owned();
        for l in 0..=last {
            let z = x.dot(&self.weights[l]) + &self.biases[l];
            inputs.push(x);
            x = if l < last { z.mapv(|v| v.max(0.0)) } else { self.apply_output(&z) };
            pre.push(z);
        }
        Ok(Cache { inputs, pre, output: x })
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        if input.ncols() != self.input_dim() {
            return Err(NeuralError::Dimension { expected: self.input_dim(), got: input.ncols() });
        }
        let last = self.weights.len() - 1;
        let mut x = input.to_owned();
        for l in 0..=last {
            let z = x.dot(&self.weights[l]) + &self.biases[l];
            x = if l < last { z.mapv_into(|v| v.max(0.0)) } else { self.apply_output(&z) };
        }
        Ok(x)
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    fn apply_output(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.output {
            OutputActivation::Identity => z.clone(),
            OutputActivation::Tanh => z.mapv(f64::tanh),
            OutputActivation::Softmax => {
                let mut out = z.clone();
                for mut row in out.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - m).exp());
                    let s = row.sum();
                    row /= s;
                }
                out
            }
        }
    }

    /// Gradients of `sum(output ⊙ grad_output)` with respect to the parameters and the input.
    pub fn backward(&self, cache: &Cache, grad_output: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let y = &cache.output;
        let mut delta: Array2<f64> = match self.output {
            OutputActivation::Identity => grad_output.to_owned(),
            OutputActivation::Tanh => &grad_output * &y.mapv(|t| 1.0 - t * t),
            OutputActivation::Softmax => {
                let dot = (&grad_output * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                y * &(&grad_output - &dot)
            }
        };
        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            gw[l] = cache.inputs[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            let dx = delta.dot(&self.weights[l].t());
            if l == 0 {
                return (Gradients { weights: gw, biases: gb }, dx);
            }
            let z = &cache.pre[l - 1];
            delta = dx;
            ndarray::Zip::from(&mut delta).and(z).for_each(|d, &zz| {
                if zz <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        unreachable!("at least one layer")
    }
}

/// Row-major batch from equally long rows.
pub fn batch(rows: &[&[f64]]) -> Array2<f64> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut flat = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        assert_eq!(r.len(), cols, "ragged batch");
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), cols), flat).expect("shape matches")
}

#[cfg(test)]
pub(crate) mod tests;
