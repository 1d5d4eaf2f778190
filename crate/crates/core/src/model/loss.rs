use super::Matrix;
use crate::error::{Error, Result};

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols) {
        return Err(Error::Input(format!(
            "label {bad} out of range for {} classes",
            logits.cols
        )));
    }
    Ok(())
}

/// Returns `(max, ln(1 + sum_{j != argmax} exp(z_j - max)), argmax)` of one logit row.
///
/// Keeping the two parts of the log-sum-exp apart lets a confidently correct
/// prediction keep its tiny loss instead of rounding to 0.
#[inline]
fn log_sum_exp_parts(row: &[f64]) -> (f64, f64, usize) {
    let (arg, max) =
        row.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(ai, am), (i, v)| {
                if v > am {
                    (i, v)
                } else {
                    (ai, am)
                }
            });
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != arg)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    (max, rest.ln_1p(), arg)
}

#[inline]
fn log_sum_exp(row: &[f64]) -> f64 {
    let (max, tail, _) = log_sum_exp_parts(row);
    max + tail
}

#[inline]
fn row_loss(row: &[f64], label: usize) -> f64 {
    let (max, tail, arg) = log_sum_exp_parts(row);
    if arg == label {
        tail
    } else {
        (max - row[label]) + tail
    }
}

/// Per-example natural-log cross-entropy and `softmax - onehot`.
///
/// `dlogits` is *not* divided by the batch size; [`super::backward`] averages.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(Vec<f64>, Matrix)> {
    check_labels(logits, labels)?;
    let mut losses = Vec::with_capacity(logits.rows);
    let mut d = Matrix::zeros(logits.rows, logits.cols);
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let lse = log_sum_exp(row);
        losses.push(row_loss(row, y));
        let drow = d.row_mut(r);
        for (dj, &z) in drow.iter_mut().zip(row) {
            *dj = (z - lse).exp();
        }
        drow[y] -= 1.0;
    }
    Ok((losses, d))
}

pub fn per_example_loss(logits: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(logits, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(r, &y)| row_loss(logits.row(r), y))
        .collect())
}

/// Softmax of one row.
pub(crate) fn softmax_row(row: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(row);
    row.iter().map(|&z| (z - lse).exp()).collect()
}
