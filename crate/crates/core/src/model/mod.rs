//! Dense ReLU classifier with analytic gradients, inverted dropout and AdamW.
//!
//! Everything runs in `f64` so that analytic gradients can be checked against
//! central finite differences at tight tolerances. Weights of each layer are
//! stored input-major (`in_dim × out_dim`, row-major): the forward pass is then
//! a sequence of contiguous `axpy` updates, and the order of every reduction is
//! fixed, which keeps trajectories bitwise reproducible.

mod forward;
mod gradcheck;
mod loss;
mod optim;

pub use forward::{backward, forward, forward_with_masks, ForwardResult, Mode};
pub use gradcheck::{
    finite_difference_grad, max_relative_error, max_relative_error_excluding, FiniteDifference,
};
pub(crate) use loss::softmax_row;
pub use loss::{per_example_loss, softmax_cross_entropy};
pub use optim::{adamw_step, OptimizerConfig};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::Fnv1a;
use crate::rng::{self, Stream};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Stacks equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl ModelSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        num_classes: usize,
        dropout_rate: f64,
    ) -> Result<Self> {
        let spec = ModelSpec {
            input_dim,
            hidden_dims,
            num_classes,
            dropout_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Input("input_dim must be positive".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Input(
                "hidden_dims must be a non-empty list of positive widths".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::Input("num_classes must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Input(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// `(in_dim, out_dim)` for each dense layer, input to logits.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.num_classes));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// Weights and biases of one dense layer; also used for gradients and moments.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `in_dim × out_dim`, row-major by input unit.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LayerParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.out_dim + output]
    }
}

/// Gradients of the mean batch loss, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerParams>,
}

impl GradientSet {
    pub fn zeros(spec: &ModelSpec) -> Self {
        GradientSet {
            layers: spec
                .layer_dims()
                .iter()
                .map(|&(i, o)| LayerParams::zeros(i, o))
                .collect(),
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub layers: Vec<LayerParams>,
    pub adam_m: Vec<LayerParams>,
    pub adam_v: Vec<LayerParams>,
    pub step_count: u64,
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases and moments zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelState> {
    spec.validate()?;
    let mut rng = rng::stream(seed, Stream::Init);
    let dims = spec.layer_dims();
    let layers = dims
        .iter()
        .map(|&(fan_in, out)| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            LayerParams {
                in_dim: fan_in,
                out_dim: out,
                weights,
                bias: vec![0.0; out],
            }
        })
        .collect();
    let zeros: Vec<_> = dims
        .iter()
        .map(|&(i, o)| LayerParams::zeros(i, o))
        .collect();
    Ok(ModelState {
        spec: spec.clone(),
        layers,
        adam_m: zeros.clone(),
        adam_v: zeros,
        step_count: 0,
    })
}

impl ModelState {
    /// FNV-1a over the bit patterns of all weights and biases, in layer order.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        for layer in &self.layers {
            for &w in &layer.weights {
                h.write_f64(w);
            }
            for &b in &layer.bias {
                h.write_f64(b);
            }
        }
        h.finish()
    }

    pub fn num_params(&self) -> usize {
        self.spec.num_params()
    }

    /// Eval-mode logits without retaining backprop caches.
    pub fn predict_logits(&self, features: &Matrix) -> Result<Matrix> {
        forward::predict(self, features)
    }

    /// Eval-mode per-example cross-entropy.
    pub fn losses(&self, features: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
        let logits = self.predict_logits(features)?;
        per_example_loss(&logits, labels)
    }

    pub(crate) fn param_mut(&mut self, index: usize) -> &mut f64 {
        let mut idx = index;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if idx < nw {
                return &mut layer.weights[idx];
            }
            idx -= nw;
            if idx < layer.bias.len() {
                return &mut layer.bias[idx];
            }
            idx -= layer.bias.len();
        }
        panic!("parameter index {index} out of range");
    }
}
