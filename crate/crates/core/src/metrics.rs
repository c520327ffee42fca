//! Entropy, purity, information gain, classification scores and the ratio
//! objective that drives rule growth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::Rule;

/// Shannon entropy in bits of a class histogram, with `0 log 0 = 0`.
pub fn entropy(histogram: &[usize]) -> Result<f64> {
    let total: usize = histogram.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total = total as f64;
    Ok(histogram
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

/// `1 - entropy`, with entropy normalized by `log2 K` when there are more
/// than two classes so the value stays in `[0, 1]`.
pub fn purity(histogram: &[usize]) -> Result<f64> {
    let h = entropy(histogram)?;
    let k = histogram.len();
    if k > 2 {
        Ok(1.0 - h / (k as f64).log2())
    } else {
        Ok(1.0 - h)
    }
}

/// Purity of the points a rule covers.
pub fn rule_purity(rule: &Rule) -> Result<f64> {
    purity(&rule.histogram)
}

/// `n * purity`, the contribution of one covered set to the accumulated
/// purity. Empty sets contribute nothing.
pub fn weighted_purity(histogram: &[usize]) -> f64 {
    let n: usize = histogram.iter().sum();
    if n == 0 {
        return 0.0;
    }
    n as f64 * purity(histogram).expect("non-empty histogram")
}

/// Entropy of the parent minus the size-weighted entropy of two branches.
pub fn info_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return Err(Error::InconsistentCounts("histogram lengths differ".into()));
    }
    if parent.iter().zip(left.iter().zip(right)).any(|(p, (l, r))| l + r != *p) {
        return Err(Error::InconsistentCounts(
            "branch counts do not sum to the parent".into(),
        ));
    }
    let n: usize = parent.iter().sum();
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let mut gain = entropy(parent)?;
    for (branch, nb) in [(left, nl), (right, nr)] {
        if nb > 0 {
            gain -= nb as f64 / n as f64 * entropy(branch)?;
        }
    }
    Ok(gain)
}

fn check_lengths(truth: &[usize], pred: &[usize]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidDataset("no labels to score".into()));
    }
    Ok(())
}

/// F1 from confusion counts. With no true and no predicted positives the
/// score is `1.0`; otherwise zero true positives give `0.0`.
pub fn f1_from_counts(true_pos: usize, predicted_pos: usize, actual_pos: usize) -> f64 {
    if predicted_pos == 0 && actual_pos == 0 {
        1.0
    } else if true_pos == 0 {
        0.0
    } else {
        2.0 * true_pos as f64 / (predicted_pos + actual_pos) as f64
    }
}

/// F1 score on the `positive` class.
pub fn f1(truth: &[usize], pred: &[usize], positive: usize) -> Result<f64> {
    check_lengths(truth, pred)?;
    let mut tp = 0;
    let mut pp = 0;
    let mut ap = 0;
    for (&t, &p) in truth.iter().zip(pred) {
        tp += usize::from(t == positive && p == positive);
        pp += usize::from(p == positive);
        ap += usize::from(t == positive);
    }
    Ok(f1_from_counts(tp, pp, ap))
}

/// Fraction of positions where `truth` and `pred` agree.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check_lengths(truth, pred)?;
    let hits = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// The score a learner must exceed: outlier-class F1 for binary summaries,
/// accuracy for multi-class data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    F1,
    Accuracy,
}

/// Class id treated as positive by [`ScoreKind::F1`].
pub const OUTLIER: usize = 1;

impl ScoreKind {
    pub fn evaluate(self, truth: &[usize], pred: &[usize]) -> Result<f64> {
        match self {
            ScoreKind::F1 => f1(truth, pred, OUTLIER),
            ScoreKind::Accuracy => accuracy(truth, pred),
        }
    }

    /// Training score of a space partition given each cell's predicted label
    /// and class histogram.
    pub fn from_leaves<'a, I>(self, leaves: I) -> f64
    where
        I: IntoIterator<Item = (usize, &'a [usize])>,
    {
        let mut tp = 0;
        let mut pp = 0;
        let mut ap = 0;
        let mut hits = 0;
        let mut total = 0;
        for (label, hist) in leaves {
            let n: usize = hist.iter().sum();
            let pos = hist.get(OUTLIER).copied().unwrap_or(0);
            total += n;
            hits += hist.get(label).copied().unwrap_or(0);
            ap += pos;
            if label == OUTLIER {
                tp += pos;
                pp += n;
            }
        }
        match self {
            ScoreKind::F1 => f1_from_counts(tp, pp, ap),
            ScoreKind::Accuracy if total == 0 => 1.0,
            ScoreKind::Accuracy => hits as f64 / total as f64,
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(ScoreKind::F1),
            "accuracy" => Ok(ScoreKind::Accuracy),
            other => Err(Error::Config(format!("unknown score `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreKind::F1 => "f1",
            ScoreKind::Accuracy => "accuracy",
        })
    }
}

/// Running totals of the ratio objective: `a0` is the accumulated weighted
/// purity, `b0` the total rule length and `m` the stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveState {
    pub a0: f64,
    pub b0: f64,
    pub m: f64,
}

impl ObjectiveState {
    /// Sums over a rule set from scratch.
    pub fn from_rules<'a>(rules: impl IntoIterator<Item = &'a Rule>, m: f64) -> Self {
        let (a0, b0) = rules.into_iter().fold((0.0, 0.0), |(a, b), r| {
            (a + weighted_purity(&r.histogram), b + r.length() as f64)
        });
        Self { a0, b0, m }
    }

    pub fn objective(&self) -> Result<f64> {
        stair_objective(self)
    }
}

/// `a0 / (b0 + m)`.
pub fn stair_objective(state: &ObjectiveState) -> Result<f64> {
    let denom = state.b0 + state.m;
    if denom <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(state.a0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[5, 5]).unwrap(), 1.0);
        assert_eq!(entropy(&[8, 0]).unwrap(), 0.0);
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!(close(entropy(&[3, 1]).unwrap(), expected, 1e-15));
        assert!(close(entropy(&[3, 1]).unwrap(), 0.811278, 1e-6));
        assert!(matches!(entropy(&[0, 0]), Err(Error::EmptyHistogram)));
        assert!(matches!(entropy(&[]), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 7]).unwrap(), 1.0);
        assert_eq!(purity(&[4, 4]).unwrap(), 0.0);
        assert!(close(purity(&[3, 1]).unwrap(), 0.188722, 1e-6));
        assert!(close(purity(&[2, 2, 2]).unwrap(), 0.0, 1e-12));
        assert_eq!(purity(&[0, 0, 9]).unwrap(), 1.0);
    }

    #[test]
    fn info_gain_examples() {
        assert_eq!(info_gain(&[4, 4], &[4, 0], &[0, 4]).unwrap(), 1.0);
        assert!(close(info_gain(&[4, 2], &[2, 1], &[2, 1]).unwrap(), 0.0, 1e-15));
        assert!(close(info_gain(&[3, 1], &[2, 0], &[1, 1]).unwrap(), 0.311278, 1e-6));
        assert!(matches!(
            info_gain(&[3, 1], &[2, 0], &[2, 1]),
            Err(Error::InconsistentCounts(_))
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[1, 0, 1], &[1, 0, 1], 1).unwrap(), 1.0);
        assert_eq!(f1(&[1, 1, 0, 0], &[1, 0, 1, 0], 1).unwrap(), 0.5);
        assert_eq!(f1(&[0, 0], &[0, 0], 1).unwrap(), 1.0);
        assert_eq!(f1(&[0, 0], &[1, 0], 1).unwrap(), 0.0);
        assert_eq!(f1(&[1, 0], &[0, 0], 1).unwrap(), 0.0);
        assert!(matches!(f1(&[1], &[1, 0], 1), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(accuracy(&[0], &[]).is_err());
    }

    #[test]
    fn objective_examples() {
        let s = ObjectiveState {
            a0: 10.0,
            b0: 4.0,
            m: 1.0,
        };
        assert_eq!(stair_objective(&s).unwrap(), 2.0);
        let bigger = ObjectiveState { m: 2.0, ..s };
        assert!(stair_objective(&bigger).unwrap() < stair_objective(&s).unwrap());
        let root = ObjectiveState {
            a0: 50.0 * purity(&[40, 10]).unwrap(),
            b0: 0.0,
            m: 0.0,
        };
        assert!(matches!(stair_objective(&root), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn leaves_score_matches_predictions() {
        // leaves: (label, histogram)
        let leaves: Vec<(usize, Vec<usize>)> = vec![(0, vec![5, 1]), (1, vec![1, 3]), (1, vec![0, 2])];
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (label, h) in &leaves {
            for (c, &k) in h.iter().enumerate() {
                truth.extend(std::iter::repeat_n(c, k));
                pred.extend(std::iter::repeat_n(*label, k));
            }
        }
        for kind in [ScoreKind::F1, ScoreKind::Accuracy] {
            let a = kind.from_leaves(leaves.iter().map(|(l, h)| (*l, h.as_slice())));
            assert_eq!(a, kind.evaluate(&truth, &pred).unwrap());
        }
    }

    fn naive_confusion(truth: &[usize], pred: &[usize]) -> (f64, f64) {
        let mut m = [[0usize; 2]; 2];
        for (&t, &p) in truth.iter().zip(pred) {
            m[t][p] += 1;
        }
        let (tp, fp, fn_) = (m[1][1] as f64, m[0][1] as f64, m[1][0] as f64);
        let f1 = if tp + fp == 0.0 && tp + fn_ == 0.0 {
            1.0
        } else if tp == 0.0 {
            0.0
        } else {
            let p = tp / (tp + fp);
            let r = tp / (tp + fn_);
            2.0 * p * r / (p + r)
        };
        let acc = (m[0][0] + m[1][1]) as f64 / truth.len() as f64;
        (f1, acc)
    }

    proptest! {
        #[test]
        fn scores_match_confusion_oracle(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..60)) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let (f, a) = naive_confusion(&truth, &pred);
            prop_assert!(close(f1(&truth, &pred, 1).unwrap(), f, 1e-12));
            prop_assert!(close(accuracy(&truth, &pred).unwrap(), a, 1e-12));
        }

        #[test]
        fn entropy_bounds(hist in prop::collection::vec(0usize..20, 2..5)) {
            prop_assume!(hist.iter().sum::<usize>() > 0);
            let h = entropy(&hist).unwrap();
            let k = hist.len() as f64;
            prop_assert!(h >= 0.0 && h <= k.log2() + 1e-12);
            let nonzero = hist.iter().filter(|&&c| c > 0).count();
            prop_assert_eq!(h == 0.0, nonzero == 1);
            let first = hist[0];
            if hist.iter().all(|&c| c == first) {
                prop_assert!(close(h, k.log2(), 1e-12));
            } else {
                prop_assert!(h < k.log2() - 1e-12);
            }
        }

        #[test]
        fn info_gain_non_negative(left in prop::collection::vec(0usize..30, 2..4),
                                  right_seed in prop::collection::vec(0usize..30, 4)) {
            let right: Vec<usize> = right_seed.into_iter().take(left.len()).collect();
            let parent: Vec<usize> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
            prop_assume!(parent.iter().sum::<usize>() > 0);
            prop_assert!(info_gain(&parent, &left, &right).unwrap() >= -1e-12);
        }
    }
}
