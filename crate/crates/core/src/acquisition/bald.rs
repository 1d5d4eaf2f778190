use super::{AcquisitionKind, ScoreVector};
use crate::data::{batch_of, ExampleRecord};
use crate::error::{Error, Result};
use crate::model::{forward, Mode, ModelState};
use crate::rng::Rng;

pub const DEFAULT_BALD_SAMPLES: usize = 10;

/// Shannon entropy in nats; `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `H[mean_t p_t] - mean_t H[p_t]` for a set of sampled predictive distributions.
pub fn bald_from_probs(samples: &[Vec<f64>]) -> f64 {
    let t = samples.len() as f64;
    let k = samples.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for p in samples {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v / t;
        }
    }
    let mean_entropy = samples.iter().map(|p| entropy(p)).sum::<f64>() / t;
    entropy(&mean) - mean_entropy
}

/// MC-dropout BALD: `samples` stochastic forward passes, each drawing fresh
/// independent masks for every point. Labels are ignored.
pub fn score_bald(
    model: &ModelState,
    batch: &[&ExampleRecord],
    samples: usize,
    step: u64,
    rng: &mut Rng,
) -> Result<ScoreVector> {
    if model.spec.dropout_rate <= 0.0 {
        return Err(Error::Input(
            "BALD needs a model with dropout_rate > 0".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Input(format!(
            "BALD needs at least 2 MC samples, got {samples}"
        )));
    }
    let (x, _) = batch_of(batch.iter().copied(), model.spec.input_dim);
    let mut probs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(samples); x.rows];
    for _ in 0..samples {
        let f = forward(model, &x, Mode::Train, Some(rng))?;
        for (r, p) in probs.iter_mut().enumerate() {
            p.push(crate::model::softmax_row(f.logits.row(r)));
        }
    }
    let scores = probs.iter().map(|p| bald_from_probs(p)).collect();
    ScoreVector::new(
        step,
        AcquisitionKind::Bald,
        batch.iter().map(|r| r.id).collect(),
        scores,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelSpec};
    use crate::rng::{stream, Stream};

    #[test]
    fn agreement_gives_zero() {
        let p = vec![0.2, 0.5, 0.3];
        assert_eq!(bald_from_probs(&[p.clone(), p.clone(), p]), 0.0);
    }

    #[test]
    // Rounded literals are the published example values, checked on purpose.
    #[allow(clippy::approx_constant)]
    fn disagreeing_one_hots_give_ln2() {
        let v = bald_from_probs(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn three_class_four_samples_direct_evaluation() {
        let s = [
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
            vec![0.25, 0.25, 0.5],
        ];
        // Direct evaluation, written out term by term.
        let mean = [
            (0.7 + 0.1 + 0.3 + 0.25) / 4.0,
            (0.2 + 0.8 + 0.3 + 0.25) / 4.0,
            (0.1 + 0.1 + 0.4 + 0.5) / 4.0,
        ];
        let h = |p: &[f64]| -> f64 { p.iter().map(|v: &f64| -v * v.ln()).sum() };
        let expected = h(&mean) - (h(&s[0]) + h(&s[1]) + h(&s[2]) + h(&s[3])) / 4.0;
        assert!((bald_from_probs(&s) - expected).abs() < 1e-14);
        assert!(expected > 0.0);
    }

    #[test]
    fn requires_dropout_and_two_samples() {
        let recs = [ExampleRecord::clean(0, vec![0.5, 0.5], 0)];
        let batch: Vec<&ExampleRecord> = recs.iter().collect();
        let mut rng = stream(0, Stream::Bald);
        let plain = init_params(&ModelSpec::new(2, vec![4], 2, 0.0).unwrap(), 0).unwrap();
        assert!(score_bald(&plain, &batch, 10, 0, &mut rng).is_err());
        let drop = init_params(&ModelSpec::new(2, vec![4], 2, 0.5).unwrap(), 0).unwrap();
        assert!(score_bald(&drop, &batch, 1, 0, &mut rng).is_err());
        let s = score_bald(&drop, &batch, 10, 0, &mut rng).unwrap();
        assert!(s.scores[0] >= -1e-12);
    }
}
