//! Exact Bayesian inference over a finite hypothesis space.
//!
//! Inputs and labels are small integers; each hypothesis is a table
//! `p(y | x, h)`. Everything the approximate scorers estimate has an exact
//! counterpart here, computed by enumeration:
//!
//! - the pointwise predictive information gain of a labelled candidate about
//!   labelled holdout points, in its forward form (change in holdout
//!   surprisal) and its symmetric form (change in candidate surprisal), and
//! - the expected information gain when labels are unknown.
//!
//! The two pointwise forms are equal by Bayes' rule; the reducible-loss
//! approximation drops the training history from the holdout-conditioned term.

use crate::error::{Error, Result};

/// Labelled input `(x, y)`.
pub type Pair = (usize, usize);

const NORMALIZATION_TOL: f64 = 1e-12;
const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactBayesModel {
    /// `tables[h][x][y] = p(y | x, h)`.
    tables: Vec<Vec<Vec<f64>>>,
    prior: Vec<f64>,
    num_inputs: usize,
    num_classes: usize,
}

impl ExactBayesModel {
    pub fn new(tables: Vec<Vec<Vec<f64>>>, prior: Vec<f64>) -> Result<Self> {
        if tables.is_empty() || tables.len() != prior.len() {
            return Err(Error::Input(format!(
                "{} hypotheses but {} prior weights",
                tables.len(),
                prior.len()
            )));
        }
        let num_inputs = tables[0].len();
        let num_classes = tables[0].first().map_or(0, Vec::len);
        if num_inputs == 0 || num_classes == 0 {
            return Err(Error::Input("empty input or label alphabet".into()));
        }
        if prior.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (prior.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL
        {
            return Err(Error::Input("prior must be a probability vector".into()));
        }
        for (h, table) in tables.iter().enumerate() {
            if table.len() != num_inputs || table.iter().any(|row| row.len() != num_classes) {
                return Err(Error::Shape(format!(
                    "hypothesis {h} has a differently shaped table"
                )));
            }
            for row in table {
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p))
                    || (row.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL
                {
                    return Err(Error::Input(format!(
                        "hypothesis {h} has a row that is not a distribution"
                    )));
                }
            }
        }
        Ok(ExactBayesModel {
            tables,
            prior,
            num_inputs,
            num_classes,
        })
    }

    pub fn num_hypotheses(&self) -> usize {
        self.prior.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    fn check(&self, pairs: &[Pair]) -> Result<()> {
        match pairs
            .iter()
            .find(|&&(x, y)| x >= self.num_inputs || y >= self.num_classes)
        {
            Some(p) => Err(Error::Input(format!(
                "observation {p:?} outside the model alphabet"
            ))),
            None => Ok(()),
        }
    }

    fn likelihood(&self, h: usize, pairs: &[Pair]) -> f64 {
        pairs.iter().map(|&(x, y)| self.tables[h][x][y]).product()
    }

    /// Posterior over hypotheses after observing `observations`.
    pub fn exact_posterior(&self, observations: &[Pair]) -> Result<Vec<f64>> {
        self.check(observations)?;
        let unnorm: Vec<f64> = (0..self.prior.len())
            .map(|h| self.prior[h] * self.likelihood(h, observations))
            .collect();
        let z: f64 = unnorm.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        Ok(unnorm.into_iter().map(|w| w / z).collect())
    }

    /// `p(query labels | query inputs, conditioning)`, jointly.
    pub fn joint_predictive(&self, query: &[Pair], conditioning: &[Pair]) -> Result<f64> {
        self.check(query)?;
        let post = self.exact_posterior(conditioning)?;
        Ok(post
            .iter()
            .enumerate()
            .map(|(h, w)| w * self.likelihood(h, query))
            .sum())
    }

    /// Pointwise conditional entropy `-ln p(query | conditioning)`.
    pub fn surprisal(&self, query: &[Pair], conditioning: &[Pair]) -> Result<f64> {
        let p = self.joint_predictive(query, conditioning)?;
        if p <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        Ok(-p.ln())
    }

    /// Holdout surprisal before minus after also conditioning on `candidate`.
    pub fn ppig_forward(&self, history: &[Pair], holdout: &[Pair], candidate: Pair) -> Result<f64> {
        let with = concat(history, &[candidate]);
        Ok(self.surprisal(holdout, history)? - self.surprisal(holdout, &with)?)
    }

    /// Candidate surprisal given the history minus given history and holdout.
    pub fn ppig_symmetric(
        &self,
        history: &[Pair],
        holdout: &[Pair],
        candidate: Pair,
    ) -> Result<f64> {
        let with = concat(history, holdout);
        Ok(self.surprisal(&[candidate], history)? - self.surprisal(&[candidate], &with)?)
    }

    /// Reducible holdout loss: like [`Self::ppig_symmetric`] but the second term
    /// conditions on the holdout data only.
    pub fn reducible_loss(
        &self,
        history: &[Pair],
        holdout: &[Pair],
        candidate: Pair,
    ) -> Result<f64> {
        Ok(self.surprisal(&[candidate], history)? - self.surprisal(&[candidate], holdout)?)
    }

    /// Mutual information between the candidate's label and the holdout labels,
    /// `H[Y_val | history] - H[Y_val | Y, history]`, by full enumeration.
    pub fn epig_expected(
        &self,
        history: &[Pair],
        holdout_inputs: &[usize],
        candidate_x: usize,
    ) -> Result<f64> {
        let outcomes = (self.num_classes as u128)
            .checked_pow(holdout_inputs.len() as u32 + 1)
            .unwrap_or(u128::MAX);
        if outcomes > ENUMERATION_CAP {
            return Err(Error::EnumerationTooLarge {
                outcomes,
                cap: ENUMERATION_CAP,
            });
        }
        let post = self.exact_posterior(history)?;
        let probe: Vec<Pair> = holdout_inputs
            .iter()
            .map(|&x| (x, 0))
            .chain([(candidate_x, 0)])
            .collect();
        self.check(&probe)?;

        let k = self.num_classes;
        let n_val = holdout_inputs.len();
        let n_val_outcomes = k.pow(n_val as u32);
        // joint[y][v]: candidate label y, holdout label vector index v.
        let mut joint = vec![vec![0.0; n_val_outcomes]; k];
        let mut labels = vec![0usize; n_val];
        for v in 0..n_val_outcomes {
            decode(v, k, &mut labels);
            for (y, row) in joint.iter_mut().enumerate() {
                row[v] = post
                    .iter()
                    .enumerate()
                    .map(|(h, w)| {
                        let t = &self.tables[h];
                        w * t[candidate_x][y]
                            * holdout_inputs
                                .iter()
                                .zip(&labels)
                                .map(|(&x, &l)| t[x][l])
                                .product::<f64>()
                    })
                    .sum();
            }
        }
        let p_y: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
        let p_v: Vec<f64> = (0..n_val_outcomes)
            .map(|v| joint.iter().map(|row| row[v]).sum())
            .collect();
        let h = |ps: &mut dyn Iterator<Item = f64>| -> f64 {
            ps.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
        };
        let h_val = h(&mut p_v.iter().copied());
        // H[Y_val | Y] = H[Y, Y_val] - H[Y]
        let h_joint = h(&mut joint.iter().flatten().copied());
        let h_y = h(&mut p_y.iter().copied());
        Ok(h_val - (h_joint - h_y))
    }
}

fn concat(a: &[Pair], b: &[Pair]) -> Vec<Pair> {
    a.iter().chain(b).copied().collect()
}

/// Writes the base-`k` digits of `v` (least significant first) into `out`.
pub(crate) fn decode(mut v: usize, k: usize, out: &mut [usize]) {
    for d in out.iter_mut() {
        *d = v % k;
        v /= k;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_model() -> ExactBayesModel {
        // One input, two labels, two hypotheses.
        ExactBayesModel::new(
            vec![vec![vec![0.9, 0.1]], vec![vec![0.1, 0.9]]],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn posterior_without_data_is_prior() {
        let m = coin_model();
        assert_eq!(m.exact_posterior(&[]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn one_line_bayes() {
        let post = coin_model().exact_posterior(&[(0, 0)]).unwrap();
        assert!((post[0] - 0.9).abs() < 1e-15 && (post[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_hypothesis_never_moves() {
        let m =
            ExactBayesModel::new(vec![vec![vec![0.3, 0.7], vec![0.6, 0.4]]], vec![1.0]).unwrap();
        assert_eq!(m.exact_posterior(&[(0, 1), (1, 0)]).unwrap(), vec![1.0]);
        assert_eq!(m.ppig_forward(&[(0, 0)], &[(1, 1)], (0, 1)).unwrap(), 0.0);
        assert_eq!(m.ppig_symmetric(&[], &[(1, 1)], (0, 1)).unwrap(), 0.0);
        assert!(m.epig_expected(&[], &[1, 0], 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn zero_evidence() {
        let m = ExactBayesModel::new(
            vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(matches!(
            m.exact_posterior(&[(0, 1)]),
            Err(Error::ZeroEvidence)
        ));
    }

    #[test]
    fn redundant_candidate_gains_nothing() {
        // Deterministic hypotheses: once (0, 0) is seen, every surviving
        // hypothesis predicts it with certainty.
        let m = ExactBayesModel::new(
            vec![
                vec![vec![1.0, 0.0], vec![1.0, 0.0]],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let history = [(0, 0)];
        assert_eq!(m.ppig_forward(&history, &[(1, 1)], (0, 0)).unwrap(), 0.0);
        assert_eq!(m.ppig_symmetric(&history, &[(1, 1)], (0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn three_hypotheses_two_inputs_brute_force() {
        let m = ExactBayesModel::new(
            vec![
                vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                vec![vec![0.4, 0.6], vec![0.9, 0.1]],
                vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            ],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        let history = [(1, 0)];
        let holdout = [(0, 1), (1, 1)];
        let cand = (0, 0);
        // Brute force: ln p(holdout | history, cand) - ln p(holdout | history)
        // = ln [p(hold, cand | hist) / (p(hold | hist) p(cand | hist))].
        let prior = [0.5, 0.3, 0.2];
        let t = [
            [[0.8, 0.2], [0.3, 0.7]],
            [[0.4, 0.6], [0.9, 0.1]],
            [[0.5, 0.5], [0.2, 0.8]],
        ];
        let w: Vec<f64> = (0..3).map(|h| prior[h] * t[h][1][0]).collect();
        let z: f64 = w.iter().sum();
        let p_hold: f64 = (0..3).map(|h| w[h] / z * t[h][0][1] * t[h][1][1]).sum();
        let p_cand: f64 = (0..3).map(|h| w[h] / z * t[h][0][0]).sum();
        let p_both: f64 = (0..3)
            .map(|h| w[h] / z * t[h][0][1] * t[h][1][1] * t[h][0][0])
            .sum();
        let expected = (p_both / (p_hold * p_cand)).ln();
        assert!((m.ppig_forward(&history, &holdout, cand).unwrap() - expected).abs() < 1e-14);
        assert!((m.ppig_symmetric(&history, &holdout, cand).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn empty_history_reducible_equals_symmetric() {
        let m = coin_model();
        let a = m.ppig_symmetric(&[], &[(0, 0), (0, 0)], (0, 1)).unwrap();
        let b = m.reducible_loss(&[], &[(0, 0), (0, 0)], (0, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epig_zero_when_candidate_uninformative() {
        // Input 1 has the same label distribution under every hypothesis.
        let m = ExactBayesModel::new(
            vec![
                vec![vec![0.9, 0.1], vec![0.5, 0.5]],
                vec![vec![0.2, 0.8], vec![0.5, 0.5]],
            ],
            vec![0.4, 0.6],
        )
        .unwrap();
        assert!(m.epig_expected(&[], &[0, 0], 1).unwrap().abs() < 1e-15);
        assert!(m.epig_expected(&[], &[0, 0], 0).unwrap() > 0.0);
    }

    #[test]
    fn enumeration_cap() {
        let m = ExactBayesModel::new(vec![vec![vec![0.5, 0.5]]], vec![1.0]).unwrap();
        let inputs = vec![0; 25];
        assert!(matches!(
            m.epig_expected(&[], &inputs, 0),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn validation() {
        assert!(ExactBayesModel::new(vec![vec![vec![0.5, 0.4]]], vec![1.0]).is_err());
        assert!(ExactBayesModel::new(vec![vec![vec![0.5, 0.5]]], vec![0.9]).is_err());
        assert!(
            ExactBayesModel::new(vec![vec![vec![0.5, 0.5]], vec![vec![1.0]]], vec![0.5, 0.5])
                .is_err()
        );
        assert!(coin_model().exact_posterior(&[(1, 0)]).is_err());
    }
}
