use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::trainer::ScoreRow;

/// Ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "cannot correlate {} values with {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Input(
            "rank correlation needs at least two points".into(),
        ));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Input(
            "rank correlation is undefined for constant scores".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Per-step Spearman ρ over the (step, id) keys present in both dumps.
/// Steps with fewer than two shared keys or constant scores are skipped.
pub fn per_step_spearman(a: &[ScoreRow], b: &[ScoreRow]) -> Vec<(u64, f64)> {
    let index: BTreeMap<(u64, u32), f64> = b.iter().map(|r| ((r.step, r.id), r.score)).collect();
    let mut by_step: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in a {
        if let Some(&s) = index.get(&(r.step, r.id)) {
            let e = by_step.entry(r.step).or_default();
            e.0.push(r.score);
            e.1.push(s);
        }
    }
    by_step
        .into_iter()
        .filter_map(|(step, (x, y))| spearman(&x, &y).ok().map(|rho| (step, rho)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AcquisitionKind;
    use proptest::prelude::*;

    #[test]
    fn ties_share_ranks() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn textbook_value() {
        // d = rank differences (0, 0, 1, -1, 0): rho = 1 - 6*2 / (5*24) = 0.9
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[10.0, 20.0, 40.0, 30.0, 50.0]).unwrap();
        assert!((rho - 0.9).abs() < 1e-12);
    }

    #[test]
    fn one_swap_in_four() {
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn joins_on_step_and_id() {
        let row = |step, id, score| ScoreRow {
            step,
            id,
            kind: AcquisitionKind::Reducible,
            score,
        };
        let a = vec![
            row(1, 1, 0.1),
            row(1, 2, 0.2),
            row(1, 3, 0.3),
            row(2, 1, 1.0),
            row(2, 2, 1.0),
        ];
        let b = vec![
            row(1, 3, 9.0),
            row(1, 1, 7.0),
            row(1, 2, 8.0),
            row(2, 1, 1.0),
            row(2, 2, 2.0),
            row(3, 1, 0.0),
        ];
        assert_eq!(per_step_spearman(&a, &b), vec![(1, 1.0)]);
    }

    proptest! {
        #[test]
        fn monotone_maps_give_one(v in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let w: Vec<f64> = v.iter().map(|x| (x / 100.0).tanh() * 3.0 + 1.0).collect();
            prop_assume!(v.iter().any(|x| *x != v[0]));
            let rho = spearman(&v, &w).unwrap();
            // tanh can merge close values into ties, which only lowers rho slightly.
            prop_assert!(rho > 0.99);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert!((spearman(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        }

        #[test]
        fn bounded(a in proptest::collection::vec(-10f64..10.0, 3..30), seed in 0u64..1000) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| ((i as u64 * 7919 + seed) % 13) as f64 - x).collect();
            if let Ok(rho) = spearman(&a, &b) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
            }
        }
    }
}
