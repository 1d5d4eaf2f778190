use rand::Rng as _;

use super::{GradientSet, LayerParams, Matrix, ModelState};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
struct Caches {
    /// Input fed to each dense layer; hidden activations are post-ReLU and post-dropout.
    layer_inputs: Vec<Matrix>,
    /// Multiplier applied to kept hidden units (1 when no dropout was applied).
    keep_scale: f64,
}

#[derive(Clone, Debug)]
pub struct ForwardResult {
    pub logits: Matrix,
    /// One `rows × width` mask per hidden layer, row-major. Empty unless
    /// dropout was actually applied.
    pub dropout_masks: Vec<Vec<bool>>,
    caches: Option<Caches>,
}

impl ForwardResult {
    pub fn has_caches(&self) -> bool {
        self.caches.is_some()
    }
}

enum Masking<'a> {
    None,
    Sample(&'a mut Rng, f64),
    Fixed(&'a [Vec<bool>], f64),
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn dense(layer: &LayerParams, input: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(input.rows, layer.out_dim);
    for r in 0..input.rows {
        let o = out.row_mut(r);
        o.copy_from_slice(&layer.bias);
        for (i, &x) in input.row(r).iter().enumerate() {
            if x != 0.0 {
                axpy(
                    o,
                    x,
                    &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim],
                );
            }
        }
    }
    out
}

fn check_input(state: &ModelState, features: &Matrix) -> Result<()> {
    if features.cols != state.spec.input_dim {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            features.cols, state.spec.input_dim
        )));
    }
    Ok(())
}

fn propagate(
    state: &ModelState,
    features: &Matrix,
    mut masking: Masking<'_>,
    keep: bool,
) -> Result<ForwardResult> {
    check_input(state, features)?;
    let n_layers = state.layers.len();
    let keep_scale = match masking {
        Masking::None => 1.0,
        Masking::Sample(_, p) | Masking::Fixed(_, p) => 1.0 / (1.0 - p),
    };
    let mut masks = Vec::new();
    let mut inputs = Vec::with_capacity(if keep { n_layers } else { 0 });
    let mut current = features.clone();
    for (l, layer) in state.layers.iter().enumerate() {
        let mut z = dense(layer, &current);
        if l + 1 < n_layers {
            for v in z.data.iter_mut() {
                *v = v.max(0.0);
            }
            match &mut masking {
                Masking::None => {}
                Masking::Sample(rng, p) => {
                    let p = *p;
                    let mask: Vec<bool> = (0..z.data.len())
                        .map(|_| rng.random::<f64>() >= p)
                        .collect();
                    apply_mask(&mut z, &mask, keep_scale);
                    masks.push(mask);
                }
                Masking::Fixed(given, _) => {
                    let mask = given.get(l).ok_or_else(|| {
                        Error::Input(format!("no dropout mask for hidden layer {l}"))
                    })?;
                    if mask.len() != z.data.len() {
                        return Err(Error::Shape(format!(
                            "dropout mask for layer {l} has {} entries, expected {}",
                            mask.len(),
                            z.data.len()
                        )));
                    }
                    apply_mask(&mut z, mask, keep_scale);
                    masks.push(mask.clone());
                }
            }
        }
        if keep {
            inputs.push(std::mem::replace(&mut current, z));
        } else {
            current = z;
        }
    }
    if current.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::State("non-finite logits".into()));
    }
    Ok(ForwardResult {
        logits: current,
        dropout_masks: masks,
        caches: keep.then_some(Caches {
            layer_inputs: inputs,
            keep_scale,
        }),
    })
}

fn apply_mask(z: &mut Matrix, mask: &[bool], scale: f64) {
    for (v, &m) in z.data.iter_mut().zip(mask) {
        *v = if m { *v * scale } else { 0.0 };
    }
}

/// Forward pass with backprop caches.
///
/// Train mode applies inverted dropout to every hidden activation when the
/// spec's `dropout_rate` is positive; masks are drawn from `rng` in layer,
/// row, unit order. Eval mode is deterministic and ignores `rng`.
pub fn forward(
    state: &ModelState,
    features: &Matrix,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<ForwardResult> {
    let p = state.spec.dropout_rate;
    let masking = match (mode, p > 0.0) {
        (Mode::Train, true) => {
            let rng =
                rng.ok_or_else(|| Error::Input("train-mode dropout requires an rng".into()))?;
            Masking::Sample(rng, p)
        }
        _ => Masking::None,
    };
    propagate(state, features, masking, true)
}

/// Train-mode forward pass that reuses previously drawn dropout masks.
pub fn forward_with_masks(
    state: &ModelState,
    features: &Matrix,
    masks: &[Vec<bool>],
) -> Result<ForwardResult> {
    let p = state.spec.dropout_rate;
    if p == 0.0 || masks.is_empty() {
        return propagate(state, features, Masking::None, true);
    }
    propagate(state, features, Masking::Fixed(masks, p), true)
}

pub(crate) fn predict(state: &ModelState, features: &Matrix) -> Result<Matrix> {
    propagate(state, features, Masking::None, false).map(|f| f.logits)
}

/// Forward without caches; `backward` rejects the result.
#[cfg(test)]
pub(crate) fn forward_uncached(state: &ModelState, features: &Matrix) -> Result<ForwardResult> {
    propagate(state, features, Masking::None, false)
}

/// Gradients of the *mean* per-example loss given `dlogits` = d(loss_i)/d(logits_i).
pub fn backward(state: &ModelState, fwd: &ForwardResult, dlogits: &Matrix) -> Result<GradientSet> {
    let caches = fwd
        .caches
        .as_ref()
        .ok_or_else(|| Error::State("forward result carries no backprop caches".into()))?;
    if caches.layer_inputs.len() != state.layers.len() {
        return Err(Error::State(
            "forward result was produced by a different architecture".into(),
        ));
    }
    if dlogits.rows != fwd.logits.rows || dlogits.cols != fwd.logits.cols {
        return Err(Error::Shape(format!(
            "dlogits is {}x{}, logits are {}x{}",
            dlogits.rows, dlogits.cols, fwd.logits.rows, fwd.logits.cols
        )));
    }
    for (layer, input) in state.layers.iter().zip(&caches.layer_inputs) {
        if input.cols != layer.in_dim {
            return Err(Error::State(
                "cached activations do not match model shapes".into(),
            ));
        }
    }
    let n = dlogits.rows;
    let mut grads = GradientSet::zeros(&state.spec);
    if n == 0 {
        return Ok(grads);
    }
    let inv_n = 1.0 / n as f64;
    let mut dz = Matrix {
        rows: n,
        cols: dlogits.cols,
        data: dlogits.data.iter().map(|g| g * inv_n).collect(),
    };

    for l in (0..state.layers.len()).rev() {
        let layer = &state.layers[l];
        let input = &caches.layer_inputs[l];
        let g = &mut grads.layers[l];
        for r in 0..n {
            let dzr = dz.row(r);
            axpy(&mut g.bias, 1.0, dzr);
            for (i, &a) in input.row(r).iter().enumerate() {
                if a != 0.0 {
                    axpy(
                        &mut g.weights[i * layer.out_dim..(i + 1) * layer.out_dim],
                        a,
                        dzr,
                    );
                }
            }
        }
        if l == 0 {
            break;
        }
        let mut prev = Matrix::zeros(n, layer.in_dim);
        for r in 0..n {
            let dzr = dz.row(r);
            let arow = input.row(r);
            let prow = prev.row_mut(r);
            for i in 0..layer.in_dim {
                // a > 0 exactly when the ReLU was active and the unit was kept.
                if arow[i] > 0.0 {
                    prow[i] = caches.keep_scale
                        * dot(
                            &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim],
                            dzr,
                        );
                }
            }
        }
        dz = prev;
    }
    Ok(grads)
}
