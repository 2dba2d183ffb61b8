//! Classification metrics and the label distribution error.

use alloc::format;
use alloc::vec;

use crate::{Error, Matrix, Result, TaskKind};

/// Pooled (node, label) confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// `num / den`, reading `0 / 0` as a perfect score: nothing to get wrong.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub micro_sensitivity: f64,
    pub micro_specificity: f64,
    pub task: TaskKind,
    pub samples: usize,
}

/// Scores raw model outputs against 0/1 targets.
///
/// Multi-class takes the arg-max (first on ties). Multi-label predicts a
/// label when its sigmoid exceeds 0.5, i.e. when the logit is positive, and
/// reports element-wise accuracy.
pub fn score_logits(logits: &Matrix, truth: &Matrix, task: TaskKind) -> Result<MetricsReport> {
    if logits.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "predictions are {:?} but targets are {:?}",
            logits.shape(),
            truth.shape()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyInput("no rows to evaluate"));
    }
    let mut confusion = Confusion::default();
    let mut correct = 0usize;
    for (out, target) in logits.row_iter().zip(truth.row_iter()) {
        match task {
            TaskKind::MultiClass => {
                let best = argmax(out);
                if target[best] == 1.0 {
                    correct += 1;
                }
                for (l, &t) in target.iter().enumerate() {
                    confusion.add(l == best, t == 1.0);
                }
            }
            TaskKind::MultiLabel => {
                for (&o, &t) in out.iter().zip(target) {
                    confusion.add(o > 0.0, t == 1.0);
                }
            }
        }
    }
    let accuracy = match task {
        TaskKind::MultiClass => correct as f64 / logits.rows() as f64,
        TaskKind::MultiLabel => confusion.accuracy(),
    };
    Ok(MetricsReport {
        accuracy,
        micro_f1: confusion.f1(),
        micro_sensitivity: confusion.sensitivity(),
        micro_specificity: confusion.specificity(),
        task,
        samples: logits.rows(),
    })
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Macro-averaged gap between per-label node ratios before and after a
/// collapse: `1/L * sum_l |n_l / n - N_l / N|`.
pub fn label_distribution_error(original: &Matrix, collapsed: &Matrix) -> Result<f64> {
    if original.cols() != collapsed.cols() {
        return Err(Error::Shape(format!(
            "original has {} labels but collapsed has {}",
            original.cols(),
            collapsed.cols()
        )));
    }
    if collapsed.rows() == 0 {
        return Err(Error::EmptyInput("collapsed label set has no nodes"));
    }
    if original.rows() == 0 {
        return Err(Error::EmptyInput("original label set has no nodes"));
    }
    if original.cols() == 0 {
        return Err(Error::Shape("label matrices have no columns".into()));
    }
    let ratios = |m: &Matrix| {
        let mut counts = vec![0usize; m.cols()];
        for row in m.row_iter() {
            for (c, &y) in counts.iter_mut().zip(row) {
                if y != 0.0 {
                    *c += 1;
                }
            }
        }
        let n = m.rows() as f64;
        counts.into_iter().map(move |c| c as f64 / n)
    };
    let total: f64 = ratios(collapsed)
        .zip(ratios(original))
        .map(|(a, b)| libm::fabs(a - b))
        .sum();
    Ok(total / original.cols() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AttributeSet;

    #[test]
    fn perfect_predictor() {
        let y = Matrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        let logits = Matrix::from_rows(&[[3.0, -1.0, 2.0], [-2.0, 1.0, -0.5]]).unwrap();
        let r = score_logits(&logits, &y, TaskKind::MultiLabel).unwrap();
        assert_eq!(
            (r.accuracy, r.micro_f1, r.micro_sensitivity, r.micro_specificity),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn all_negative_multilabel() {
        let y = Matrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        let logits = Matrix::from_rows(&[[-1.0; 3], [-1.0; 3]]).unwrap();
        let r = score_logits(&logits, &y, TaskKind::MultiLabel).unwrap();
        assert_eq!(r.micro_sensitivity, 0.0);
        assert_eq!(r.micro_specificity, 1.0);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn hand_confusion_case() {
        // TP=2, FP=1, FN=1, TN=4 across four nodes with two labels each
        let y = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let logits = Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
        let r = score_logits(&logits, &y, TaskKind::MultiLabel).unwrap();
        assert!((r.micro_f1 - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.micro_f1 - 0.667).abs() < 1e-3);
        assert_eq!(r.micro_sensitivity, 2.0 / 3.0);
        assert_eq!(r.micro_specificity, 4.0 / 5.0);
    }

    #[test]
    fn multiclass_f1_matches_accuracy() {
        let y = AttributeSet::one_hot(&[0, 1, 2, 1, 0], 3).unwrap();
        let logits = Matrix::from_rows(&[
            [2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
            [0.0, 3.0, 1.0],
            [0.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = score_logits(&logits, &y, TaskKind::MultiClass).unwrap();
        assert_eq!(r.accuracy, 0.6);
        assert_eq!(r.micro_f1, r.accuracy);
        assert_eq!(r.micro_sensitivity, r.accuracy);
    }

    #[test]
    fn empty_rows_rejected() {
        let e = score_logits(&Matrix::zeros(0, 2), &Matrix::zeros(0, 2), TaskKind::MultiClass);
        assert!(matches!(e, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn lerr_examples() {
        let balanced = AttributeSet::one_hot(&[0, 1, 0, 1], 2).unwrap();
        assert_eq!(label_distribution_error(&balanced, &balanced).unwrap(), 0.0);
        let skewed = AttributeSet::one_hot(&[0, 0], 2).unwrap();
        assert_eq!(label_distribution_error(&balanced, &skewed).unwrap(), 0.5);
        assert!(matches!(
            label_distribution_error(&balanced, &Matrix::zeros(0, 2)),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            label_distribution_error(&balanced, &Matrix::zeros(1, 3)),
            Err(Error::Shape(_))
        ));
    }
}
