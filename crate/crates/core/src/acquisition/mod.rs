//! Per-point acquisition scores and top-k selection.
//!
//! All scores follow "higher is more worth training on". The label-aware
//! scores are built from cross-entropy under the current model and the cached
//! loss of a model trained only on holdout data:
//!
//! | kind              | score                                    |
//! |-------------------|------------------------------------------|
//! | `uniform`         | i.i.d. `U(0, 1)`                          |
//! | `high_loss`       | current loss                             |
//! | `neg_irreducible` | `-irreducible loss`                      |
//! | `reducible`       | current loss `-` irreducible loss        |
//! | `bald`            | MC-dropout mutual information (label-free) |

mod bald;
pub mod exact_bayes;

pub use bald::{bald_from_probs, entropy, score_bald, DEFAULT_BALD_SAMPLES};
pub use exact_bayes::ExactBayesModel;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{batch_of, ExampleRecord};
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Uniform,
    HighLoss,
    NegIrreducible,
    Reducible,
    Bald,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] = [
        AcquisitionKind::Uniform,
        AcquisitionKind::HighLoss,
        AcquisitionKind::NegIrreducible,
        AcquisitionKind::Reducible,
        AcquisitionKind::Bald,
    ];

    /// Tag byte used in sequence files.
    pub fn tag(self) -> u8 {
        match self {
            AcquisitionKind::Uniform => 0,
            AcquisitionKind::HighLoss => 1,
            AcquisitionKind::NegIrreducible => 2,
            AcquisitionKind::Reducible => 3,
            AcquisitionKind::Bald => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Uniform => "uniform",
            AcquisitionKind::HighLoss => "high_loss",
            AcquisitionKind::NegIrreducible => "neg_irreducible",
            AcquisitionKind::Reducible => "reducible",
            AcquisitionKind::Bald => "bald",
        }
    }

    pub fn needs_irreducible(self) -> bool {
        matches!(
            self,
            AcquisitionKind::NegIrreducible | AcquisitionKind::Reducible
        )
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown acquisition kind {s:?}")))
    }
}

/// Loss of every training point under the holdout-trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct IrreducibleLossTable {
    losses: HashMap<u32, f64>,
    pub source_model_fingerprint: u64,
}

impl IrreducibleLossTable {
    /// Evaluates `model` (eval mode) on every record.
    pub fn from_model(model: &ModelState, records: &[ExampleRecord]) -> Result<Self> {
        let mut losses = HashMap::with_capacity(records.len());
        for chunk in records.chunks(512) {
            let (x, y) = batch_of(chunk, model.spec.input_dim);
            for (r, l) in chunk.iter().zip(model.losses(&x, &y)?) {
                losses.insert(r.id, l);
            }
        }
        Ok(IrreducibleLossTable {
            losses,
            source_model_fingerprint: model.fingerprint(),
        })
    }

    pub fn from_losses(losses: HashMap<u32, f64>, source_model_fingerprint: u64) -> Result<Self> {
        if let Some((id, l)) = losses.iter().find(|(_, l)| !l.is_finite() || **l < 0.0) {
            return Err(Error::Input(format!(
                "irreducible loss {l} for id {id} is not a finite non-negative value"
            )));
        }
        Ok(IrreducibleLossTable {
            losses,
            source_model_fingerprint,
        })
    }

    pub fn get(&self, id: u32) -> Result<f64> {
        self.losses
            .get(&id)
            .copied()
            .ok_or(Error::MissingIrreducible(id))
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn covers(&self, ids: impl IntoIterator<Item = u32>) -> bool {
        ids.into_iter().all(|id| self.losses.contains_key(&id))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub step: u64,
    pub kind: AcquisitionKind,
    pub ids: Vec<u32>,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(step: u64, kind: AcquisitionKind, ids: Vec<u32>, scores: Vec<f64>) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::Shape(format!(
                "{} ids for {} scores",
                ids.len(),
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite score for id {}", ids[i])));
        }
        Ok(ScoreVector {
            step,
            kind,
            ids,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len().max(1) as f64
    }
}

/// Scores a large batch. `rng` feeds the uniform scores and BALD's dropout
/// masks; loss-based kinds run the model in eval mode and do not touch it.
pub fn score(
    kind: AcquisitionKind,
    model: &ModelState,
    irr: Option<&IrreducibleLossTable>,
    batch: &[&ExampleRecord],
    step: u64,
    rng: &mut Rng,
) -> Result<ScoreVector> {
    let ids: Vec<u32> = batch.iter().map(|r| r.id).collect();
    let irreducible = |ids: &[u32]| -> Result<Vec<f64>> {
        let table = irr.ok_or_else(|| {
            Error::Input(format!("{kind} scoring needs an irreducible loss table"))
        })?;
        ids.iter().map(|&id| table.get(id)).collect()
    };
    let current_loss = || -> Result<Vec<f64>> {
        let (x, y) = batch_of(batch.iter().copied(), model.spec.input_dim);
        model.losses(&x, &y)
    };
    let scores = match kind {
        AcquisitionKind::Uniform => ids.iter().map(|_| rng.random::<f64>()).collect(),
        AcquisitionKind::HighLoss => current_loss()?,
        AcquisitionKind::NegIrreducible => irreducible(&ids)?.into_iter().map(|l| -l).collect(),
        AcquisitionKind::Reducible => {
            let irr = irreducible(&ids)?;
            current_loss()?
                .into_iter()
                .zip(irr)
                .map(|(l, i)| l - i)
                .collect()
        }
        AcquisitionKind::Bald => return score_bald(model, batch, DEFAULT_BALD_SAMPLES, step, rng),
    };
    ScoreVector::new(step, kind, ids, scores)
}

/// Ids of the `k` highest scores, by descending score then ascending id.
pub fn select_top_k(scores: &ScoreVector, k: usize) -> Result<Vec<u32>> {
    if k > scores.len() {
        return Err(Error::Input(format!(
            "cannot select {k} of {} scored points",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores.scores[b]
            .total_cmp(&scores.scores[a])
            .then(scores.ids[a].cmp(&scores.ids[b]))
    });
    Ok(order[..k].iter().map(|&i| scores.ids[i]).collect())
}
