//! ROC curves and AUC for distance-based proximity scores.
//!
//! A pair is a positive when its ground-truth distance is strictly below the
//! labeling threshold. Pairs are ranked by `-est_distance_m`, so the smallest
//! estimated distance is the most confident "near".

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("no pairs to evaluate")]
    Empty,
    #[error("labeling threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("pair {index} has an invalid distance")]
    InvalidDistance { index: usize },
    #[error("need both classes, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
}

/// Ground-truth and estimated distance for one person-vehicle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub gt_distance_m: f64,
    pub est_distance_m: f64,
}

impl LabeledPair {
    pub fn new(gt_distance_m: f64, est_distance_m: f64) -> Self {
        Self {
            gt_distance_m,
            est_distance_m,
        }
    }
}

/// A scored sample with its binary label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub samples: Vec<ScoredSample>,
}

impl LabeledSet {
    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.positive).count()
    }

    pub fn negatives(&self) -> usize {
        self.samples.len() - self.positives()
    }
}

impl FromIterator<ScoredSample> for LabeledSet {
    fn from_iter<T: IntoIterator<Item = ScoredSample>>(iter: T) -> Self {
        Self {
            samples: iter.into_iter().collect(),
        }
    }
}

/// Labels each pair (`gt < threshold` is positive) and scores it by its
/// negated estimated distance.
pub fn label_pairs(
    pairs: &[LabeledPair],
    gt_threshold_m: f64,
) -> Result<LabeledSet, EvaluationError> {
    if !(gt_threshold_m.is_finite() && gt_threshold_m > 0.0) {
        return Err(EvaluationError::InvalidThreshold(gt_threshold_m));
    }
    if pairs.is_empty() {
        return Err(EvaluationError::Empty);
    }
    pairs
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let valid = |d: f64| d.is_finite() && d >= 0.0;
            if !(valid(p.gt_distance_m) && valid(p.est_distance_m)) {
                return Err(EvaluationError::InvalidDistance { index });
            }
            Ok(ScoredSample {
                score: -p.est_distance_m,
                positive: p.gt_distance_m < gt_threshold_m,
            })
        })
        .collect()
}

/// An ROC curve from `(0, 0)` to `(1, 1)` and its trapezoidal area.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false_positive_rate, true_positive_rate)`
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub positive_count: usize,
    pub negative_count: usize,
}

/// Sweeps the decision threshold over the distinct scores, highest first.
/// Tied scores move together, producing one diagonal segment.
pub fn roc_auc(set: &LabeledSet) -> Result<RocCurve, EvaluationError> {
    if set.samples.is_empty() {
        return Err(EvaluationError::Empty);
    }
    let positives = set.positives();
    let negatives = set.negatives();
    if positives == 0 || negatives == 0 {
        return Err(EvaluationError::SingleClass {
            positives,
            negatives,
        });
    }

    let mut order: Vec<&ScoredSample> = set.samples.iter().collect();
    order.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in (fp, tp) count units, kept integral for exactness.
    let mut area2: u128 = 0;
    let mut idx = 0;
    while idx < order.len() {
        let score = order[idx].score;
        let (tp0, fp0) = (tp, fp);
        while idx < order.len() && order[idx].score == score {
            if order[idx].positive {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push((fp as f64 / n, tp as f64 / p));
    }
    let auc = area2 as f64 / (2.0 * p * n);
    Ok(RocCurve {
        points,
        auc,
        positive_count: positives,
        negative_count: negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn strict_threshold() {
        let set = label_pairs(
            &[LabeledPair::new(3.9, 1.0), LabeledPair::new(4.0, 2.0)],
            4.0,
        )
        .unwrap();
        assert!(set.samples[0].positive);
        assert!(!set.samples[1].positive);
    }

    #[test]
    fn single_class_rejected() {
        let set = label_pairs(
            &[LabeledPair::new(1.0, 1.0), LabeledPair::new(2.0, 2.0)],
            4.0,
        )
        .unwrap();
        assert_eq!(
            roc_auc(&set),
            Err(EvaluationError::SingleClass {
                positives: 2,
                negatives: 0
            })
        );
        assert_eq!(label_pairs(&[], 4.0), Err(EvaluationError::Empty));
        assert!(label_pairs(&[LabeledPair::new(-1.0, 0.0)], 4.0).is_err());
    }

    #[test]
    fn perfect_ranking() {
        let pairs: Vec<_> = (0..20)
            .map(|i| LabeledPair::new(i as f64 * 0.5, i as f64 * 0.5))
            .collect();
        let roc = roc_auc(&label_pairs(&pairs, 4.0).unwrap()).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_tied_is_chance() {
        let pairs = vec![
            LabeledPair::new(1.0, 3.0),
            LabeledPair::new(2.0, 3.0),
            LabeledPair::new(7.0, 3.0),
        ];
        let roc = roc_auc(&label_pairs(&pairs, 4.0).unwrap()).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }
}
