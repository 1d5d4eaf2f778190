use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ExampleRecord;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub label_noise_rate: f64,
    pub white_noise_fraction: f64,
    /// Also corrupt validation labels. Off by default: the irreducible-loss
    /// model is meant to learn from clean holdout data.
    pub corrupt_validation: bool,
    /// Also append white-noise points to the validation split, at the same fraction.
    pub white_noise_validation: bool,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            label_noise_rate: 0.0,
            white_noise_fraction: 0.0,
            corrupt_validation: false,
            white_noise_validation: false,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return Err(Error::Input(format!(
                "label_noise_rate {} outside [0, 1]",
                self.label_noise_rate
            )));
        }
        if !(0.0..1.0).contains(&self.white_noise_fraction) {
            return Err(Error::Input(format!(
                "white_noise_fraction {} outside [0, 1)",
                self.white_noise_fraction
            )));
        }
        Ok(())
    }
}

/// Uniform label noise.
///
/// Each record is selected independently with probability `rate`; a selected
/// record gets a label drawn uniformly from the `num_classes - 1` classes other
/// than its true label, so every selected record really is mislabelled.
/// Returns the number of corrupted records.
pub fn apply_label_noise(
    records: &mut [ExampleRecord],
    rate: f64,
    num_classes: usize,
    seed: u64,
) -> Result<usize> {
    if num_classes < 2 {
        return Err(Error::Input("label noise needs at least 2 classes".into()));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Input(format!("noise rate {rate} outside [0, 1]")));
    }
    let mut rng = rng::stream(seed, Stream::LabelNoise);
    let mut count = 0;
    for r in records.iter_mut() {
        // Always draw both numbers so the stream position is independent of outcomes.
        let u: f64 = rng.random();
        let pick = rng.random_range(0..num_classes - 1);
        if u < rate {
            r.label = if pick >= r.true_label { pick + 1 } else { pick };
            r.corrupted = true;
            count += 1;
        }
    }
    Ok(count)
}

/// Number of white-noise points to append so they form `fraction` of the result.
pub fn white_noise_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 / (1.0 - fraction)).round() as usize
}

/// Appends uniform-noise inputs with uniformly random labels.
///
/// New ids start at `first_id` and count upwards. The number appended is
/// [`white_noise_count`] of the current length. Returns that number.
pub fn inject_white_noise_points(
    records: &mut Vec<ExampleRecord>,
    fraction: f64,
    num_classes: usize,
    input_dim: usize,
    first_id: u32,
    seed: u64,
) -> Result<usize> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Input(format!(
            "white-noise fraction {fraction} outside [0, 1)"
        )));
    }
    if num_classes < 2 {
        return Err(Error::Input(
            "white-noise labels need at least 2 classes".into(),
        ));
    }
    let count = white_noise_count(records.len(), fraction);
    let mut rng = rng::stream(seed, Stream::WhiteNoise);
    for k in 0..count {
        let features = (0..input_dim).map(|_| rng.random::<f64>()).collect();
        let label = rng.random_range(0..num_classes);
        records.push(ExampleRecord {
            id: first_id + k as u32,
            features,
            label,
            true_label: label,
            corrupted: false,
            white_noise: true,
        });
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(n: usize, k: usize) -> Vec<ExampleRecord> {
        (0..n)
            .map(|i| ExampleRecord::clean(i as u32, vec![0.5], i % k))
            .collect()
    }

    #[test]
    fn zero_rate_leaves_records_alone() {
        let mut r = records(100, 10);
        let before = r.clone();
        assert_eq!(apply_label_noise(&mut r, 0.0, 10, 1).unwrap(), 0);
        assert_eq!(r, before);
    }

    #[test]
    fn full_rate_corrupts_everything() {
        let mut r = records(500, 3);
        assert_eq!(apply_label_noise(&mut r, 1.0, 3, 2).unwrap(), 500);
        assert!(r
            .iter()
            .all(|x| x.corrupted && x.label != x.true_label && x.label < 3));
    }

    #[test]
    fn ten_percent_within_three_sigma() {
        let mut r = records(10_000, 10);
        let n = apply_label_noise(&mut r, 0.1, 10, 3).unwrap();
        assert!((n as f64 - 1000.0).abs() <= 90.0, "{n}");
        for x in &r {
            assert_eq!(x.corrupted, x.label != x.true_label);
            assert_eq!(x.true_label, x.id as usize % 10);
        }
    }

    #[test]
    fn noise_needs_two_classes() {
        assert!(apply_label_noise(&mut records(3, 1), 0.5, 1, 0).is_err());
    }

    #[test]
    fn white_noise_counts() {
        let mut r = records(8000, 10);
        assert_eq!(
            inject_white_noise_points(&mut r, 0.2, 10, 1, 8000, 5).unwrap(),
            2000
        );
        assert_eq!(r.len(), 10_000);
        let share = r.iter().filter(|x| x.white_noise).count() as f64 / r.len() as f64;
        assert_eq!(share, 0.2);
        let mean: f64 = r
            .iter()
            .filter(|x| x.white_noise)
            .map(|x| x.features[0])
            .sum::<f64>()
            / 2000.0;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
        let mut ids: Vec<u32> = r.iter().map(|x| x.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 10_000);

        let mut unchanged = records(10, 2);
        assert_eq!(
            inject_white_noise_points(&mut unchanged, 0.0, 2, 1, 10, 5).unwrap(),
            0
        );
        assert_eq!(unchanged.len(), 10);
        assert!(inject_white_noise_points(&mut unchanged, 1.0, 2, 1, 10, 5).is_err());
    }
}
