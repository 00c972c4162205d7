//! Scoring: confusion matrices, mean F1-score, and accuracy.
//!
//! Mean F1 averages the per-class harmonic mean of precision and recall over
//! all classes and is the protocol's primary metric; accuracy (in percent)
//! is secondary.

use crate::error::{Error, Result};

/// c×c count matrix; rows index the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    classes: usize,
}

impl ConfusionMatrix {
    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.count(i, i)).sum()
    }
}

/// Tallies predictions against ground truth into a c×c confusion matrix.
pub fn confusion(preds: &[usize], truths: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if classes < 2 {
        return Err(Error::InvalidParameter(
            "confusion matrix needs at least two classes".into(),
        ));
    }
    if preds.len() != truths.len() {
        return Err(Error::dims(
            "scored labels",
            format!("{} predictions", truths.len()),
            format!("{} predictions", preds.len()),
        ));
    }
    let mut counts = vec![0u64; classes * classes];
    for (i, (&p, &t)) in preds.iter().zip(truths.iter()).enumerate() {
        if p >= classes || t >= classes {
            return Err(Error::InvalidParameter(format!(
                "label out of range at sample {i}: pred {p}, truth {t}, classes {classes}"
            )));
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { counts, classes })
}

/// Mean F1-score in [0, 1]: (1/c)·Σᵢ 2pᵢrᵢ/(pᵢ+rᵢ) with the convention that
/// a class with pᵢ+rᵢ = 0 contributes 0 (and a class never predicted has
/// precision 0).
pub fn mean_f1(cm: &ConfusionMatrix) -> f64 {
    let c = cm.class_count();
    let mut sum = 0.0;
    for i in 0..c {
        let tp = cm.count(i, i) as f64;
        let predicted: f64 = (0..c).map(|t| cm.count(t, i) as f64).sum();
        let actual: f64 = (0..c).map(|p| cm.count(i, p) as f64).sum();
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    sum / c as f64
}

/// Accuracy in percent: 100·(correct predictions)/(scored samples).
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidParameter(
            "cannot score an empty confusion matrix".into(),
        ));
    }
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn from_counts(rows: &[&[u64]]) -> ConfusionMatrix {
        let classes = rows.len();
        let mut counts = Vec::with_capacity(classes * classes);
        for r in rows {
            assert_eq!(r.len(), classes);
            counts.extend_from_slice(r);
        }
        ConfusionMatrix { counts, classes }
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let preds = vec![0, 1, 2, 1, 0];
        let cm = confusion(&preds, &preds, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(cm.count(t, p), 0);
                }
            }
        }
        assert_relative_eq!(mean_f1(&cm), 1.0);
        assert_relative_eq!(accuracy(&cm).unwrap(), 100.0);
    }

    #[test]
    fn constant_predictor_fills_one_column() {
        let truths = vec![0, 1, 2, 1];
        let preds = vec![0usize; 4];
        let cm = confusion(&preds, &truths, 3).unwrap();
        for t in 0..3 {
            for p in 1..3 {
                assert_eq!(cm.count(t, p), 0, "column {p} must be empty");
            }
        }
        assert_eq!(cm.count(1, 0), 2);
    }

    // Oracle: naive double loop over all (sample, truth-class, pred-class)
    // triples.
    #[test]
    fn confusion_matches_naive_count() {
        let mut rng = StdRng::seed_from_u64(71);
        let truths: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let preds: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let cm = confusion(&preds, &truths, 4).unwrap();
        for t in 0..4 {
            for p in 0..4 {
                let naive = truths
                    .iter()
                    .zip(preds.iter())
                    .filter(|(&tt, &pp)| tt == t && pp == p)
                    .count() as u64;
                assert_eq!(cm.count(t, p), naive);
            }
        }
        assert_eq!(cm.total(), 100);
    }

    #[test]
    fn balanced_half_errors_give_half_f1() {
        let cm = from_counts(&[&[5, 5], &[5, 5]]);
        assert_relative_eq!(mean_f1(&cm), 0.5);
        assert_relative_eq!(accuracy(&cm).unwrap(), 50.0);
    }

    // Hand computation: class 2 is never true and never predicted, so its
    // term is 0. Class 0: p = 4/6, r = 4/5. Class 1: p = 3/4, r = 3/5.
    // mean F1 = (0.7273 + 0.6667 + 0) / 3; accuracy = 70%.
    #[test]
    fn unpredicted_class_pulls_mean_f1_below_accuracy() {
        let cm = from_counts(&[&[4, 1, 0], &[2, 3, 0], &[0, 0, 0]]);
        let p0: f64 = 4.0 / 6.0;
        let r0: f64 = 4.0 / 5.0;
        let p1: f64 = 3.0 / 4.0;
        let r1: f64 = 3.0 / 5.0;
        let expect = (2.0 * p0 * r0 / (p0 + r0) + 2.0 * p1 * r1 / (p1 + r1)) / 3.0;
        assert_relative_eq!(mean_f1(&cm), expect, max_relative = 1e-15);
        assert_relative_eq!(accuracy(&cm).unwrap(), 70.0);
        assert!(mean_f1(&cm) < accuracy(&cm).unwrap() / 100.0);
    }

    #[test]
    fn trace_ratio_accuracy() {
        let cm = from_counts(&[&[40, 9], &[20, 31]]);
        assert_relative_eq!(accuracy(&cm).unwrap(), 71.0);
    }

    #[test]
    fn metrics_invariant_under_class_permutation() {
        let mut rng = StdRng::seed_from_u64(72);
        let truths: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
        let preds: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
        let cm = confusion(&preds, &truths, 3).unwrap();
        let perm = [2usize, 0, 1];
        let pt: Vec<usize> = truths.iter().map(|&t| perm[t]).collect();
        let pp: Vec<usize> = preds.iter().map(|&p| perm[p]).collect();
        let pcm = confusion(&pp, &pt, 3).unwrap();
        assert_relative_eq!(mean_f1(&cm), mean_f1(&pcm), max_relative = 1e-15);
        assert_relative_eq!(
            accuracy(&cm).unwrap(),
            accuracy(&pcm).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn diagonal_matrix_equates_the_metrics() {
        let cm = from_counts(&[&[7, 0, 0], &[0, 2, 0], &[0, 0, 11]]);
        assert_relative_eq!(mean_f1(&cm), accuracy(&cm).unwrap() / 100.0);
    }

    #[test]
    fn validation_errors() {
        assert!(confusion(&[0, 1], &[0], 2).is_err());
        assert!(confusion(&[0, 2], &[0, 1], 2).is_err());
        assert!(confusion(&[0], &[0], 1).is_err());
        let empty = ConfusionMatrix {
            counts: vec![0; 4],
            classes: 2,
        };
        assert!(accuracy(&empty).is_err());
    }
}
