use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    /// No true samples of this class; F1 is 0 by convention.
    pub fn is_empty(&self) -> bool {
        self.support == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    /// Percent.
    pub recognition_rate: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    pub fn from_labels(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("truth and prediction lengths differ"));
        }
        if let Some(&bad) = truth.iter().chain(predicted).find(|&&c| c >= classes) {
            return Err(Error::invalid(format!("class {bad} out of range for {classes} classes")));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = truth.len();
        let trace: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let per_class = (0..classes)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted_c);
                let recall = ratio(tp, support);
                ClassMetrics {
                    class: c,
                    support,
                    precision,
                    recall,
                    f1: f1(precision, recall),
                }
            })
            .collect();
        Ok(Self {
            total,
            recognition_rate: if total == 0 { 0.0 } else { 100.0 * trace as f64 / total as f64 },
            per_class,
            confusion,
        })
    }

    /// Argmax of each probability vector against the true labels.
    pub fn from_probabilities(truth: &[usize], probs: &[Vec<f64>], classes: usize) -> Result<Self> {
        let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        Self::from_labels(truth, &predicted, classes)
    }

    pub fn f1_scores(&self) -> Vec<f64> {
        self.per_class.iter().map(|m| m.f1).collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let k = self.per_class.len().max(1) as f64;
        self.per_class.iter().map(|m| m.f1).sum::<f64>() / k
    }
}

/// One-vs-all F1 straight from label lists, without a confusion matrix.
pub fn one_vs_all_f1(truth: &[usize], predicted: &[usize], class: usize) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    f1(ratio(tp, tp + fp), ratio(tp, tp + fneg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_go_low() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn perfect_predictor() {
        let t = [0, 1, 2, 1, 0];
        let r = EvalReport::from_labels(&t, &t, 3).unwrap();
        assert_eq!(r.recognition_rate, 100.0);
        assert_eq!(r.f1_scores(), vec![1.0, 1.0, 1.0]);
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v == 0, i != j);
            }
        }
    }

    #[test]
    fn constant_predictor_balanced_two_class() {
        let t = [0, 0, 1, 1];
        let r = EvalReport::from_labels(&t, &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(r.recognition_rate, 50.0);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn empty_class_flagged() {
        let r = EvalReport::from_labels(&[0, 1], &[0, 1], 3).unwrap();
        assert!(r.per_class[2].is_empty());
        assert_eq!(r.per_class[2].f1, 0.0);
    }

    proptest! {
        #[test]
        fn two_path_f1_and_totals(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let r = EvalReport::from_labels(&t, &p, 4).unwrap();
            let total: usize = r.confusion.iter().flatten().sum();
            prop_assert_eq!(total, t.len());
            let trace: usize = (0..4).map(|c| r.confusion[c][c]).sum();
            prop_assert_eq!(r.recognition_rate, 100.0 * trace as f64 / t.len() as f64);
            for c in 0..4 {
                prop_assert_eq!(r.confusion[c].iter().sum::<usize>(), r.per_class[c].support);
                let direct = one_vs_all_f1(&t, &p, c);
                prop_assert!((direct - r.per_class[c].f1).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&r.per_class[c].f1));
            }
        }
    }
}
