use crate::data::DatasetBundle;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CompositionRow {
    pub step: u64,
    pub corrupted_frac: f64,
    pub whitenoise_frac: f64,
    /// Trailing means over the last `window` steps (fewer at the start).
    pub corrupted_window: f64,
    pub whitenoise_window: f64,
}

pub const COMPOSITION_WINDOW: usize = 100;

/// Per-step corrupted and white-noise fractions of recorded batches.
pub fn selection_composition(
    bundle: &DatasetBundle,
    batches: &[Vec<u32>],
    window: usize,
) -> Result<Vec<CompositionRow>> {
    let window = window.max(1);
    let mut per_step = Vec::with_capacity(batches.len());
    for batch in batches {
        let recs = bundle.train_records(batch)?;
        let n = recs.len().max(1) as f64;
        let c = recs.iter().filter(|r| r.corrupted).count() as f64 / n;
        let w = recs.iter().filter(|r| r.white_noise).count() as f64 / n;
        per_step.push((c, w));
    }
    let (mut sum_c, mut sum_w) = (0.0, 0.0);
    let mut rows = Vec::with_capacity(per_step.len());
    for (i, &(c, w)) in per_step.iter().enumerate() {
        sum_c += c;
        sum_w += w;
        if i >= window {
            sum_c -= per_step[i - window].0;
            sum_w -= per_step[i - window].1;
        }
        let len = (i + 1).min(window) as f64;
        rows.push(CompositionRow {
            step: i as u64 + 1,
            corrupted_frac: c,
            whitenoise_frac: w,
            corrupted_window: sum_c / len,
            whitenoise_window: sum_w / len,
        });
    }
    Ok(rows)
}

pub fn composition_csv(rows: &[CompositionRow]) -> String {
    use std::fmt::Write as _;
    let mut out = format!("{}\n", super::output::COMPOSITION_HEADER);
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.step, r.corrupted_frac, r.whitenoise_frac, r.corrupted_window, r.whitenoise_window
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{apply_label_noise, inject_white_noise_points, ExampleRecord};
    use crate::error::Error;
    use crate::rng::{stream, Stream};
    use rand::seq::SliceRandom;

    fn bundle(noise: f64, white: f64) -> DatasetBundle {
        let mut train: Vec<ExampleRecord> = (0..400)
            .map(|i| ExampleRecord::clean(i, vec![(i % 7) as f64 / 7.0], (i % 4) as usize))
            .collect();
        apply_label_noise(&mut train, noise, 4, 1).unwrap();
        if white > 0.0 {
            inject_white_noise_points(&mut train, white, 4, 1, 400, 2).unwrap();
        }
        let test = vec![ExampleRecord::clean(10_000, vec![0.0], 0)];
        DatasetBundle::new(train, vec![], test, 4, 1).unwrap()
    }

    #[test]
    fn clean_data_has_zero_fractions() {
        let b = bundle(0.0, 0.0);
        let batches: Vec<Vec<u32>> = (0..10).map(|s| (s * 8..s * 8 + 8).collect()).collect();
        let rows = selection_composition(&b, &batches, 100).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.corrupted_frac == 0.0 && r.whitenoise_frac == 0.0));
    }

    #[test]
    fn all_corrupted_selection_is_one() {
        let b = bundle(0.3, 0.0);
        let bad: Vec<u32> = b
            .train()
            .iter()
            .filter(|r| r.corrupted)
            .map(|r| r.id)
            .collect();
        let batches: Vec<Vec<u32>> = bad.chunks_exact(4).map(|c| c.to_vec()).collect();
        let rows = selection_composition(&b, &batches, 100).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.corrupted_frac == 1.0 && r.corrupted_window == 1.0));
    }

    #[test]
    fn uniform_selection_tracks_white_noise_share() {
        let b = bundle(0.0, 0.2);
        assert_eq!(b.train().len(), 500);
        let mut rng = stream(5, Stream::Schedule);
        let mut ids = b.train_ids();
        let mut batches = Vec::new();
        for _ in 0..2000 {
            ids.shuffle(&mut rng);
            batches.push(ids[..32].to_vec());
        }
        let rows = selection_composition(&b, &batches, 100).unwrap();
        let mean = rows.iter().map(|r| r.whitenoise_frac).sum::<f64>() / rows.len() as f64;
        assert!((mean - 0.2).abs() < 0.03, "{mean}");
    }

    #[test]
    fn window_is_trailing_mean() {
        let b = bundle(0.5, 0.0);
        let bad = b.train().iter().find(|r| r.corrupted).unwrap().id;
        let good = b.train().iter().find(|r| !r.corrupted).unwrap().id;
        let batches = vec![vec![bad], vec![good], vec![good], vec![bad]];
        let rows = selection_composition(&b, &batches, 2).unwrap();
        let w: Vec<f64> = rows.iter().map(|r| r.corrupted_window).collect();
        assert_eq!(w, vec![1.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn unknown_id_is_an_error() {
        let b = bundle(0.0, 0.0);
        assert!(matches!(
            selection_composition(&b, &[vec![9_999]], 100),
            Err(Error::UnknownId(9_999))
        ));
    }
}
