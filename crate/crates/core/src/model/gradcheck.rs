//! Central finite differences, for testing [`super::backward`].

use super::forward::dense;
use super::{forward_with_masks, per_example_loss, GradientSet, Matrix, ModelState};
use crate::error::Result;

fn mean_loss(
    state: &ModelState,
    features: &Matrix,
    labels: &[usize],
    masks: &[Vec<bool>],
) -> Result<f64> {
    let fwd = forward_with_masks(state, features, masks)?;
    let losses = per_example_loss(&fwd.logits, labels)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Sign pattern of every hidden pre-activation (dropout only rescales, so it
/// does not affect the pattern).
fn relu_pattern(state: &ModelState, features: &Matrix) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut current = features.clone();
    for layer in &state.layers[..state.layers.len() - 1] {
        let mut z = dense(layer, &current);
        for v in z.data.iter_mut() {
            pattern.push(*v > 0.0);
            *v = v.max(0.0);
        }
        current = z;
    }
    pattern
}

#[derive(Clone, Debug)]
pub struct FiniteDifference {
    pub grad: GradientSet,
    /// Per parameter (layer order, weights then bias): whether the `±h`
    /// perturbation flipped some ReLU, which makes the difference quotient
    /// straddle a kink.
    pub crossed_kink: Vec<bool>,
}

impl FiniteDifference {
    pub fn kink_count(&self) -> usize {
        self.crossed_kink.iter().filter(|&&k| k).count()
    }
}

/// Central-difference gradient of the mean loss.
///
/// With `masks` empty the network runs without dropout; otherwise the given
/// masks are held fixed for every perturbed evaluation.
pub fn finite_difference_grad(
    state: &ModelState,
    features: &Matrix,
    labels: &[usize],
    masks: &[Vec<bool>],
    h: f64,
) -> Result<FiniteDifference> {
    let mut grad = GradientSet::zeros(&state.spec);
    let mut crossed_kink = Vec::with_capacity(state.num_params());
    let base = relu_pattern(state, features);
    let mut probe = state.clone();
    let mut index = 0;
    for layer in grad.layers.iter_mut() {
        for g in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            let orig = *probe.param_mut(index);
            *probe.param_mut(index) = orig + h;
            let plus = mean_loss(&probe, features, labels, masks)?;
            let mut kink = relu_pattern(&probe, features) != base;
            *probe.param_mut(index) = orig - h;
            let minus = mean_loss(&probe, features, labels, masks)?;
            kink |= relu_pattern(&probe, features) != base;
            *probe.param_mut(index) = orig;
            *g = (plus - minus) / (2.0 * h);
            crossed_kink.push(kink);
            index += 1;
        }
    }
    Ok(FiniteDifference { grad, crossed_kink })
}

/// Largest `|a - b| / max(|a|, |b|, 1e-6)` over all parameters.
pub fn max_relative_error(a: &GradientSet, b: &GradientSet) -> f64 {
    relative_errors(a, b).fold(0.0, f64::max)
}

/// As [`max_relative_error`], ignoring parameters where `skip` is set.
pub fn max_relative_error_excluding(a: &GradientSet, b: &GradientSet, skip: &[bool]) -> f64 {
    relative_errors(a, b)
        .zip(skip)
        .filter(|(_, &s)| !s)
        .map(|(e, _)| e)
        .fold(0.0, f64::max)
}

fn relative_errors<'a>(a: &'a GradientSet, b: &'a GradientSet) -> impl Iterator<Item = f64> + 'a {
    a.iter_values()
        .zip(b.iter_values())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
}
