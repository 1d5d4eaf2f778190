use serde::{Deserialize, Serialize};

use super::{GradientSet, ModelState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        OptimizerConfig {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid optimizer config {self:?}")))
        }
    }
}

/// One AdamW update with bias-corrected moments.
///
/// Weight decay is decoupled: weights are shrunk by `lr * weight_decay * w`
/// directly, never through the moment estimates. Biases are not decayed.
pub fn adamw_step(
    state: &mut ModelState,
    grads: &GradientSet,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if grads.layers.len() != state.layers.len()
        || grads
            .layers
            .iter()
            .zip(&state.layers)
            .any(|(g, p)| g.weights.len() != p.weights.len() || g.bias.len() != p.bias.len())
    {
        return Err(Error::Shape(
            "gradient shapes do not match model parameters".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.learning_rate;
    let decay = 1.0 - lr * cfg.weight_decay;

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], decay: f64| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p * decay - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    };

    for (l, g) in grads.layers.iter().enumerate() {
        let p = &mut state.layers[l];
        let m = &mut state.adam_m[l];
        let v = &mut state.adam_v[l];
        update(
            &mut p.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
            decay,
        );
        update(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias, 1.0);
    }
    Ok(())
}
