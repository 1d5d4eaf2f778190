//! Example records, splits, corruption and large-batch scheduling.

mod corrupt;
mod idx;
mod schedule;
mod synth;

pub use corrupt::{
    apply_label_noise, inject_white_noise_points, white_noise_count, CorruptionConfig,
};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use schedule::EpochSchedule;
pub use synth::{synth_clusters, synth_mixture};

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hash::Fnv1a;
use crate::model::Matrix;
use crate::rng::{self, Stream};

/// One training point with its observed and true label.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleRecord {
    pub id: u32,
    /// Components in `[0, 1]`.
    pub features: Vec<f64>,
    /// Observed label, possibly corrupted.
    pub label: usize,
    pub true_label: usize,
    pub corrupted: bool,
    pub white_noise: bool,
}

impl ExampleRecord {
    pub fn clean(id: u32, features: Vec<f64>, label: usize) -> Self {
        ExampleRecord {
            id,
            features,
            label,
            true_label: label,
            corrupted: false,
            white_noise: false,
        }
    }
}

/// FNV-1a over `(id u64, features as f64 bits, label u64, true_label u64)`,
/// all little-endian, with records visited in ascending id order.
pub fn fingerprint_records<'a, I>(records: I) -> u64
where
    I: IntoIterator<Item = &'a ExampleRecord>,
{
    let mut sorted: Vec<&ExampleRecord> = records.into_iter().collect();
    sorted.sort_by_key(|r| r.id);
    let mut h = Fnv1a::new();
    for r in sorted {
        h.write_u64(u64::from(r.id));
        for &f in &r.features {
            h.write_f64(f);
        }
        h.write_u64(r.label as u64);
        h.write_u64(r.true_label as u64);
    }
    h.finish()
}

/// Train, validation and test splits with a content fingerprint.
///
/// Immutable once built; the fingerprint covers all three splits.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    train: Vec<ExampleRecord>,
    validation: Vec<ExampleRecord>,
    test: Vec<ExampleRecord>,
    num_classes: usize,
    input_dim: usize,
    fingerprint: u64,
    train_index: HashMap<u32, usize>,
}

impl DatasetBundle {
    pub fn new(
        train: Vec<ExampleRecord>,
        validation: Vec<ExampleRecord>,
        test: Vec<ExampleRecord>,
        num_classes: usize,
        input_dim: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Input("num_classes must be at least 2".into()));
        }
        let mut seen = HashSet::new();
        for r in train.iter().chain(&validation).chain(&test) {
            if !seen.insert(r.id) {
                return Err(Error::Input(format!(
                    "example id {} appears more than once",
                    r.id
                )));
            }
            if r.features.len() != input_dim {
                return Err(Error::Shape(format!(
                    "example {} has {} features, expected {input_dim}",
                    r.id,
                    r.features.len()
                )));
            }
            if r.label >= num_classes || r.true_label >= num_classes {
                return Err(Error::Input(format!(
                    "example {} has a label outside 0..{num_classes}",
                    r.id
                )));
            }
            if r.corrupted != (r.label != r.true_label) {
                return Err(Error::Input(format!(
                    "example {} corruption flag disagrees with its labels",
                    r.id
                )));
            }
        }
        let fingerprint = fingerprint_records(train.iter().chain(&validation).chain(&test));
        let train_index = train.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        Ok(DatasetBundle {
            train,
            validation,
            test,
            num_classes,
            input_dim,
            fingerprint,
            train_index,
        })
    }

    /// Shuffles `records` with the split stream of `seed` and cuts it into
    /// train/validation/test of the given sizes.
    pub fn split(
        mut records: Vec<ExampleRecord>,
        sizes: (usize, usize, usize),
        num_classes: usize,
        input_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let (n_train, n_val, n_test) = sizes;
        if n_train + n_val + n_test > records.len() {
            return Err(Error::Input(format!(
                "requested {} examples but only {} are available",
                n_train + n_val + n_test,
                records.len()
            )));
        }
        records.sort_by_key(|r| r.id);
        records.shuffle(&mut rng::stream(seed, Stream::Split));
        records.truncate(n_train + n_val + n_test);
        let test = records.split_off(n_train + n_val);
        let validation = records.split_off(n_train);
        Self::new(records, validation, test, num_classes, input_dim)
    }

    pub fn train(&self) -> &[ExampleRecord] {
        &self.train
    }

    pub fn validation(&self) -> &[ExampleRecord] {
        &self.validation
    }

    pub fn test(&self) -> &[ExampleRecord] {
        &self.test
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn train_ids(&self) -> Vec<u32> {
        self.train.iter().map(|r| r.id).collect()
    }

    pub fn max_id(&self) -> Option<u32> {
        self.train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .map(|r| r.id)
            .max()
    }

    pub fn train_record(&self, id: u32) -> Result<&ExampleRecord> {
        self.train_index
            .get(&id)
            .map(|&i| &self.train[i])
            .ok_or(Error::UnknownId(id))
    }

    pub fn train_records(&self, ids: &[u32]) -> Result<Vec<&ExampleRecord>> {
        ids.iter().map(|&id| self.train_record(id)).collect()
    }

    /// Consumes the bundle, returning `(train, validation, test)`.
    pub fn into_splits(self) -> (Vec<ExampleRecord>, Vec<ExampleRecord>, Vec<ExampleRecord>) {
        (self.train, self.validation, self.test)
    }
}

/// Stacks record features into a matrix and collects observed labels.
pub fn batch_of<'a, I>(records: I, input_dim: usize) -> (Matrix, Vec<usize>)
where
    I: IntoIterator<Item = &'a ExampleRecord>,
{
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for r in records {
        data.extend_from_slice(&r.features);
        labels.push(r.label);
    }
    let rows = labels.len();
    (
        Matrix {
            rows,
            cols: input_dim,
            data,
        },
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: u32, label: usize) -> ExampleRecord {
        ExampleRecord::clean(id, vec![id as f64 / 100.0, 0.5], label)
    }

    #[test]
    fn rejects_duplicate_ids_across_splits() {
        let r = DatasetBundle::new(vec![rec(1, 0)], vec![rec(1, 1)], vec![], 2, 2);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn rejects_inconsistent_corruption_flag() {
        let mut bad = rec(1, 0);
        bad.corrupted = true;
        assert!(DatasetBundle::new(vec![bad], vec![], vec![], 2, 2).is_err());
    }

    #[test]
    fn split_is_disjoint_and_sized() {
        let records: Vec<_> = (0..50).map(|i| rec(i, (i % 2) as usize)).collect();
        let b = DatasetBundle::split(records, (30, 10, 5), 2, 2, 4).unwrap();
        assert_eq!(
            (b.train().len(), b.validation().len(), b.test().len()),
            (30, 10, 5)
        );
        let mut all: Vec<u32> = b
            .train()
            .iter()
            .chain(b.validation())
            .chain(b.test())
            .map(|r| r.id)
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 45);
        assert!(b.train_record(b.train()[3].id).is_ok());
        assert!(matches!(
            b.train_record(b.validation()[0].id),
            Err(Error::UnknownId(_))
        ));
    }

    proptest! {
        #[test]
        fn fingerprint_ignores_record_order(n in 1usize..40, seed in any::<u64>()) {
            let records: Vec<_> = (0..n as u32).map(|i| rec(i * 3, (i % 3) as usize)).collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rng::stream(seed, Stream::Split));
            prop_assert_eq!(fingerprint_records(&records), fingerprint_records(&shuffled));
        }
    }

    #[test]
    fn fingerprint_sees_label_changes() {
        let a = vec![rec(0, 0), rec(1, 1)];
        let mut b = a.clone();
        b[1].label = 0;
        assert_ne!(fingerprint_records(&a), fingerprint_records(&b));
    }
}
