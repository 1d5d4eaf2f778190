//! Irreducible-loss pretraining, the online selection loop, and replay of a
//! recorded sequence by another model.

mod irreducible;
mod replay;
mod selection;

pub use irreducible::{
    defaults as irreducible_defaults, train_irreducible_model, IrreducibleModelConfig,
    IrreducibleReport,
};
pub use replay::{replay_sequence, verify_schedule, ReplayRun, ScoreProbe};
pub use selection::{run_selection_loop, SelectionRun};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, DEFAULT_BALD_SAMPLES};
use crate::data::{batch_of, ExampleRecord};
use crate::error::{Error, Result};
use crate::model::{
    adamw_step, backward, forward, softmax_cross_entropy, Mode, ModelState, OptimizerConfig,
};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainLoopConfig {
    /// |B|: points scored per step.
    pub large_batch_size: usize,
    /// |b|: points trained on per step.
    pub batch_size: usize,
    pub total_steps: u64,
    pub kind: AcquisitionKind,
    pub optimizer: OptimizerConfig,
    pub eval_every: u64,
    pub seed: u64,
    /// MC-dropout passes per point for `bald`.
    pub bald_samples: usize,
    /// `bald` selects uniformly for this many initial steps.
    pub bald_warmup: u64,
    /// Dump the scores of the whole large batch every this many steps (0: never).
    pub score_dump_every: u64,
}

impl Default for TrainLoopConfig {
    fn default() -> Self {
        TrainLoopConfig {
            large_batch_size: 320,
            batch_size: 32,
            total_steps: 1500,
            kind: AcquisitionKind::Reducible,
            optimizer: OptimizerConfig::default(),
            eval_every: 50,
            seed: 0,
            bald_samples: DEFAULT_BALD_SAMPLES,
            bald_warmup: 200,
            score_dump_every: 0,
        }
    }
}

impl TrainLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.large_batch_size < self.batch_size {
            return Err(Error::Input(format!(
                "need large_batch_size ({}) >= batch_size ({}) >= 1",
                self.large_batch_size, self.batch_size
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::Input("total_steps must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Input("eval_every must be at least 1".into()));
        }
        if self.kind == AcquisitionKind::Bald && self.bald_samples < 2 {
            return Err(Error::Input("bald_samples must be at least 2".into()));
        }
        self.optimizer.validate()
    }
}

/// One evaluation row. Selection fractions and scores are averaged over the
/// steps since the previous row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub test_accuracy: f64,
    pub corrupted_frac: f64,
    pub whitenoise_frac: f64,
    /// Mean and max score of the selected points; NaN for replay runs.
    pub mean_score: f64,
    pub max_score: f64,
}

/// Composition of one trained batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub corrupted_frac: f64,
    pub whitenoise_frac: f64,
    pub mean_score: f64,
    pub max_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub step: u64,
    pub id: u32,
    pub kind: AcquisitionKind,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainRunResult {
    pub rows: Vec<MetricsRow>,
    pub steps: Vec<StepRecord>,
    pub final_fingerprint: u64,
    /// Every trained id, in training order.
    pub consumed: Vec<u32>,
    pub score_dumps: Vec<ScoreRow>,
}

impl TrainRunResult {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.test_accuracy)
    }

    /// Mean per-step corrupted fraction over steps `> after`.
    pub fn mean_corrupted_after(&self, after: u64) -> f64 {
        mean(
            self.steps
                .iter()
                .filter(|s| s.step > after)
                .map(|s| s.corrupted_frac),
        )
    }

    pub fn mean_whitenoise_after(&self, after: u64) -> f64 {
        mean(
            self.steps
                .iter()
                .filter(|s| s.step > after)
                .map(|s| s.whitenoise_frac),
        )
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Argmax accuracy in eval mode; ties go to the lowest class index.
pub fn evaluate(model: &ModelState, test: &[ExampleRecord]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty test set".into()));
    }
    let mut correct = 0usize;
    for chunk in test.chunks(512) {
        let (x, y) = batch_of(chunk, model.spec.input_dim);
        let logits = model.predict_logits(&x)?;
        for (r, &label) in y.iter().enumerate() {
            let row = logits.row(r);
            let pred = (1..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best });
            correct += usize::from(pred == label);
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// One AdamW step on the mean loss of `batch`, trained in the given order.
pub fn gradient_step(
    model: &mut ModelState,
    batch: &[&ExampleRecord],
    optimizer: &OptimizerConfig,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    let (x, y) = batch_of(batch.iter().copied(), model.spec.input_dim);
    let fwd = forward(model, &x, Mode::Train, Some(dropout_rng))?;
    let (losses, dlogits) = softmax_cross_entropy(&fwd.logits, &y)?;
    let grads = backward(model, &fwd, &dlogits)?;
    adamw_step(model, &grads, optimizer)?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Accumulates per-step records into evaluation rows.
#[derive(Default)]
pub(crate) struct RowWindow {
    corrupted: f64,
    whitenoise: f64,
    score: f64,
    max_score: f64,
    n: usize,
}

impl RowWindow {
    pub(crate) fn push(&mut self, s: &StepRecord) {
        if self.n == 0 {
            self.max_score = s.max_score;
        }
        self.corrupted += s.corrupted_frac;
        self.whitenoise += s.whitenoise_frac;
        self.score += s.mean_score;
        self.max_score = self.max_score.max(s.max_score);
        self.n += 1;
    }

    pub(crate) fn flush(&mut self, step: u64, test_accuracy: f64) -> MetricsRow {
        let n = self.n.max(1) as f64;
        let row = MetricsRow {
            step,
            test_accuracy,
            corrupted_frac: self.corrupted / n,
            whitenoise_frac: self.whitenoise / n,
            mean_score: self.score / n,
            max_score: self.max_score,
        };
        *self = RowWindow::default();
        row
    }
}

pub(crate) fn composition(batch: &[&ExampleRecord]) -> (f64, f64) {
    let n = batch.len().max(1) as f64;
    let c = batch.iter().filter(|r| r.corrupted).count() as f64;
    let w = batch.iter().filter(|r| r.white_noise).count() as f64;
    (c / n, w / n)
}
