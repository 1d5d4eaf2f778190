use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::gradient_step;
use crate::acquisition::IrreducibleLossTable;
use crate::data::{batch_of, DatasetBundle, ExampleRecord};
use crate::error::{Error, Result};
use crate::model::{init_params, ModelSpec, ModelState, OptimizerConfig};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrreducibleModelConfig {
    pub spec: ModelSpec,
    #[serde(default = "defaults::max_epochs")]
    pub max_epochs: usize,
    /// Epochs without improvement of the validation-set training loss before stopping.
    #[serde(default = "defaults::patience")]
    pub patience: usize,
    /// Smallest decrease that counts as an improvement.
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

pub mod defaults {
    pub fn max_epochs() -> usize {
        200
    }
    pub fn patience() -> usize {
        5
    }
    pub fn tolerance() -> f64 {
        1e-4
    }
    pub fn batch_size() -> usize {
        32
    }
}

impl IrreducibleModelConfig {
    pub fn new(spec: ModelSpec) -> Self {
        IrreducibleModelConfig {
            spec,
            max_epochs: defaults::max_epochs(),
            patience: defaults::patience(),
            tolerance: defaults::tolerance(),
            batch_size: defaults::batch_size(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Input(
                "max_epochs, patience and batch_size must be at least 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::Input("tolerance must be non-negative".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrreducibleReport {
    pub epochs: usize,
    pub final_loss: f64,
    pub best_loss: f64,
}

fn mean_loss(model: &ModelState, records: &[ExampleRecord]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in records.chunks(512) {
        let (x, y) = batch_of(chunk, model.spec.input_dim);
        total += model.losses(&x, &y)?.iter().sum::<f64>();
    }
    Ok(total / records.len() as f64)
}

/// Trains a model on the validation split only, stopping once the
/// validation-set training loss has not improved by `tolerance` for
/// `patience` epochs, then scores every training point with it.
pub fn train_irreducible_model(
    cfg: &IrreducibleModelConfig,
    bundle: &DatasetBundle,
    seed: u64,
) -> Result<(ModelState, IrreducibleLossTable, IrreducibleReport)> {
    cfg.validate()?;
    let val = bundle.validation();
    if val.is_empty() {
        return Err(Error::Input(
            "the irreducible-loss model needs a non-empty validation set".into(),
        ));
    }
    if cfg.spec.input_dim != bundle.input_dim() || cfg.spec.num_classes != bundle.num_classes() {
        return Err(Error::Shape(
            "irreducible model spec does not match the dataset".into(),
        ));
    }
    let sub_seed = rng::derive_seed(seed, Stream::Irreducible);
    let mut model = init_params(&cfg.spec, sub_seed)?;
    let mut shuffle_rng = rng::stream(sub_seed, Stream::Schedule);
    let mut dropout_rng = rng::stream(sub_seed, Stream::Dropout);
    let mut order: Vec<usize> = (0..val.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = 0;
    let mut last = f64::NAN;
    while epochs < cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&ExampleRecord> = chunk.iter().map(|&i| &val[i]).collect();
            gradient_step(&mut model, &batch, &cfg.optimizer, &mut dropout_rng)?;
        }
        epochs += 1;
        last = mean_loss(&model, val)?;
        if best - last > cfg.tolerance {
            best = last;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
        best = best.min(last);
    }
    let table = IrreducibleLossTable::from_model(&model, bundle.train())?;
    Ok((
        model,
        table,
        IrreducibleReport {
            epochs,
            final_loss: last,
            best_loss: best,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_clusters;

    fn bundle() -> DatasetBundle {
        let recs = synth_clusters(3, 6, 60, 0.15, 2).unwrap();
        DatasetBundle::split(recs, (100, 50, 30), 3, 6, 1).unwrap()
    }

    #[test]
    fn table_covers_training_ids() {
        let b = bundle();
        let mut cfg = IrreducibleModelConfig::new(ModelSpec::new(6, vec![8], 3, 0.0).unwrap());
        cfg.max_epochs = 5;
        let (model, table, report) = train_irreducible_model(&cfg, &b, 3).unwrap();
        assert_eq!(table.len(), b.train().len());
        assert!(table.covers(b.train_ids()));
        assert!(b
            .train_ids()
            .iter()
            .all(|&id| table.get(id).unwrap().is_finite()));
        assert_eq!(table.source_model_fingerprint, model.fingerprint());
        assert!(report.epochs <= 5);
    }

    #[test]
    fn duplicate_of_validation_point_has_low_loss() {
        let b = bundle();
        let (mut train, val, test) = b.clone().into_splits();
        let mut dup = val[0].clone();
        dup.id = 10_000;
        train.push(dup);
        let b = DatasetBundle::new(train, val, test, 3, 6).unwrap();
        let cfg = IrreducibleModelConfig::new(ModelSpec::new(6, vec![16], 3, 0.0).unwrap());
        let (_, table, _) = train_irreducible_model(&cfg, &b, 1).unwrap();
        let mut losses: Vec<f64> = b
            .train_ids()
            .iter()
            .map(|&id| table.get(id).unwrap())
            .collect();
        losses.sort_by(f64::total_cmp);
        let median = losses[losses.len() / 2];
        assert!(table.get(10_000).unwrap() < median);
    }

    #[test]
    fn empty_validation_rejected() {
        let b = bundle();
        let (train, _, test) = b.into_splits();
        let b = DatasetBundle::new(train, vec![], test, 3, 6).unwrap();
        let cfg = IrreducibleModelConfig::new(ModelSpec::new(6, vec![8], 3, 0.0).unwrap());
        assert!(matches!(
            train_irreducible_model(&cfg, &b, 0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn stops_early_on_patience() {
        let b = bundle();
        let mut cfg = IrreducibleModelConfig::new(ModelSpec::new(6, vec![8], 3, 0.0).unwrap());
        cfg.tolerance = 10.0;
        cfg.patience = 2;
        let (_, _, report) = train_irreducible_model(&cfg, &b, 0).unwrap();
        // First epoch always improves on +inf, the next two cannot beat a tolerance of 10.
        assert_eq!(report.epochs, 3);
    }
}
