//! Confusion matrices, per-class scores and confidence histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::NUM_CLASSES;

pub const HISTOGRAM_BINS: usize = 20;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for (r, row) in other.counts.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out.counts[r][c] += v;
            }
        }
        out
    }
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(labels) {
        for label in [p, t] {
            if label >= NUM_CLASSES {
                return Err(Error::InvalidLabel {
                    label,
                    classes: NUM_CLASSES,
                });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 per class; any 0/0 resolves to 0.
pub fn per_class_scores(cm: &ConfusionMatrix) -> [ClassScores; NUM_CLASSES] {
    std::array::from_fn(|c| {
        let tp = cm.counts[c][c];
        let precision = ratio(tp, cm.predicted(c));
        let recall = ratio(tp, cm.support(c));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassScores {
            precision,
            recall,
            f1,
        }
    })
}

/// Unweighted mean of the five per-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    per_class_scores(cm).iter().map(|s| s.f1).sum::<f64>() / NUM_CLASSES as f64
}

/// Twenty uniform confidence bins over [0, 1], split by correctness. Bins are
/// left-closed; the top bin also takes 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceHistogram {
    pub edges: Vec<f64>,
    pub correct: Vec<u64>,
    pub incorrect: Vec<u64>,
}

impl Default for ConfidenceHistogram {
    fn default() -> Self {
        Self {
            edges: (0..=HISTOGRAM_BINS)
                .map(|i| i as f64 / HISTOGRAM_BINS as f64)
                .collect(),
            correct: vec![0; HISTOGRAM_BINS],
            incorrect: vec![0; HISTOGRAM_BINS],
        }
    }
}

impl ConfidenceHistogram {
    pub fn bin_of(confidence: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceOutOfRange(confidence));
        }
        Ok(((confidence * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1))
    }

    pub fn add(&mut self, confidence: f64, correct: bool) -> Result<()> {
        let b = Self::bin_of(confidence)?;
        if correct {
            self.correct[b] += 1;
        } else {
            self.incorrect[b] += 1;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.correct.iter().chain(&self.incorrect).sum()
    }

    pub fn merge(&self, other: &ConfidenceHistogram) -> ConfidenceHistogram {
        let mut out = self.clone();
        for (a, b) in out.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in out.incorrect.iter_mut().zip(&other.incorrect) {
            *a += b;
        }
        out
    }

    /// Share of correct-prediction mass at or above `threshold`, counting only
    /// whole bins whose lower edge is at or above it.
    pub fn correct_mass_above(&self, threshold: f64) -> f64 {
        let total: u64 = self.correct.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let above: u64 = self
            .correct
            .iter()
            .zip(&self.edges)
            .filter(|(_, &lo)| lo >= threshold - 1e-12)
            .map(|(c, _)| c)
            .sum();
        above as f64 / total as f64
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub label: usize,
    pub predicted: usize,
    pub confidence: f64,
}

pub fn confidence_histogram(records: &[PredictionRecord]) -> Result<ConfidenceHistogram> {
    let mut h = ConfidenceHistogram::default();
    for r in records {
        h.add(r.confidence, r.label == r.predicted)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng as _;

    /// Tallies pairs with a linear search, independent of the indexed path.
    fn tally(preds: &[usize], labels: &[usize], t: usize, p: usize) -> u64 {
        preds
            .iter()
            .zip(labels)
            .filter(|&(&pp, &tt)| pp == p && tt == t)
            .count() as u64
    }

    /// Per-class P/R/F1 from raw prediction lists rather than the matrix.
    fn brute_force_macro_f1(preds: &[usize], labels: &[usize]) -> f64 {
        let mut sum = 0.0;
        for c in 0..NUM_CLASSES {
            let tp = preds
                .iter()
                .zip(labels)
                .filter(|&(&p, &t)| p == c && t == c)
                .count() as f64;
            let fp = preds
                .iter()
                .zip(labels)
                .filter(|&(&p, &t)| p == c && t != c)
                .count() as f64;
            let fn_ = preds
                .iter()
                .zip(labels)
                .filter(|&(&p, &t)| p != c && t == c)
                .count() as f64;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            sum += if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
        }
        sum / NUM_CLASSES as f64
    }

    #[test]
    fn small_example() {
        let cm = confusion_matrix(&[0, 0, 1], &[0, 1, 1]).unwrap();
        let mut expected = [[0u64; 5]; 5];
        expected[0][0] = 1;
        expected[1][0] = 1;
        expected[1][1] = 1;
        assert_eq!(cm.counts, expected);
        assert!(confusion_matrix(&[0], &[0, 1]).is_err());
        assert!(confusion_matrix(&[5], &[0]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let cm = confusion_matrix(&labels, &labels).unwrap();
        for (r, row) in cm.counts.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert_eq!(v, if r == c { 10 } else { 0 });
            }
        }
        assert_eq!(macro_f1(&cm), 1.0);
    }

    #[test]
    fn everything_predicted_as_class_zero() {
        let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let cm = confusion_matrix(&[0; 50], &labels).unwrap();
        // class 0: P = 0.2, R = 1 => F1 = 1/3; others 0
        assert!((macro_f1(&cm) - (1.0 / 3.0) / 5.0).abs() < 1e-15);
        assert!((macro_f1(&cm) - 0.0667).abs() < 1e-4);
    }

    #[test]
    fn random_cases_match_oracles() {
        let mut rng = seed::rng(77);
        for case in 0..100 {
            let n = if case == 0 {
                1000
            } else {
                rng.random_range(1..300)
            };
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let cm = confusion_matrix(&preds, &labels).unwrap();
            for t in 0..5 {
                for p in 0..5 {
                    assert_eq!(cm.counts[t][p], tally(&preds, &labels, t, p));
                }
            }
            assert!((macro_f1(&cm) - brute_force_macro_f1(&preds, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_examples() {
        let all_sure: Vec<PredictionRecord> = (0..10)
            .map(|i| PredictionRecord {
                label: i % 5,
                predicted: i % 5,
                confidence: 1.0,
            })
            .collect();
        let h = confidence_histogram(&all_sure).unwrap();
        assert_eq!(h.correct[19], 10);
        assert_eq!(h.total(), 10);
        assert_eq!(h.edges.len(), 21);
        assert_eq!(h.edges[20], 1.0);

        let uniform: Vec<PredictionRecord> = (0..7)
            .map(|i| PredictionRecord {
                label: i % 5,
                predicted: 0,
                confidence: 0.2,
            })
            .collect();
        let h = confidence_histogram(&uniform).unwrap();
        assert_eq!(h.correct[4] + h.incorrect[4], 7);
        assert!(confidence_histogram(&[PredictionRecord {
            label: 0,
            predicted: 0,
            confidence: 1.5
        }])
        .is_err());
    }

    proptest! {
        #[test]
        fn macro_f1_is_scale_invariant(
            counts in prop::collection::vec(0u64..50, 25),
            k in 1u64..20,
        ) {
            let mut cm = ConfusionMatrix::default();
            let mut scaled = ConfusionMatrix::default();
            for (i, c) in counts.iter().enumerate() {
                cm.counts[i / 5][i % 5] = *c;
                scaled.counts[i / 5][i % 5] = c * k;
            }
            let a = macro_f1(&cm);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - macro_f1(&scaled)).abs() < 1e-12);
        }
    }
}
