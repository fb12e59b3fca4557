use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{NegativeType, SizeBucket};

pub const DEFAULT_GAMMA: f64 = 0.5;

/// Everything the protocol needs to know about one evaluated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub positive: bool,
    /// Present exactly for positive samples.
    pub iou: Option<f64>,
    pub confidence: f64,
    pub size: Option<SizeBucket>,
    pub negative_type: NegativeType,
}

impl SampleOutcome {
    pub fn positive(id: impl Into<String>, iou: f64, confidence: f64) -> Self {
        SampleOutcome {
            id: id.into(),
            positive: true,
            iou: Some(iou),
            confidence,
            size: None,
            negative_type: NegativeType::None,
        }
    }

    pub fn negative(id: impl Into<String>, confidence: f64, negative_type: NegativeType) -> Self {
        SampleOutcome {
            id: id.into(),
            positive: false,
            iou: None,
            confidence,
            size: None,
            negative_type,
        }
    }

    fn localized(&self, gamma: f64) -> bool {
        self.positive && self.iou.is_some_and(|u| u > gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

/// TP: positive, confident and localized. FP: confident but either
/// mislocalized or negative. FN: positive but not confident.
pub fn classify(outcome: &SampleOutcome, gamma: f64, delta: f64) -> Decision {
    let confident = outcome.confidence > delta;
    match (outcome.positive, confident) {
        (true, true) if outcome.localized(gamma) => Decision::TruePositive,
        (_, true) => Decision::FalsePositive,
        (true, false) => Decision::FalseNegative,
        (false, false) => Decision::TrueNegative,
    }
}

fn count_positives(outcomes: &[SampleOutcome]) -> Result<usize> {
    match outcomes.iter().filter(|o| o.positive).count() {
        0 => Err(Error::UndefinedMetric(
            "metric needs at least one positive sample".into(),
        )),
        n => Ok(n),
    }
}

/// Fraction of positives localized above `gamma`; confidence is ignored and
/// negatives do not take part.
pub fn loc_acc(outcomes: &[SampleOutcome], gamma: f64) -> Result<f64> {
    let positives = count_positives(outcomes)?;
    let hits = outcomes.iter().filter(|o| o.localized(gamma)).count();
    Ok(hits as f64 / positives as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxF1 {
    pub f1: f64,
    /// Confidence threshold achieving `f1` (largest such threshold).
    pub delta: f64,
    pub precision: f64,
    pub recall: f64,
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (f1, precision, recall)
}

/// Best F1 over every observed confidence and minus infinity as `delta`.
///
/// F1 only changes when `delta` crosses an observed confidence, so these
/// candidates are exhaustive.
pub fn max_f1(outcomes: &[SampleOutcome], gamma: f64) -> Result<MaxF1> {
    let positives = count_positives(outcomes)?;
    let mut order: Vec<&SampleOutcome> = outcomes.iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
    });

    // delta = highest confidence: nothing is predicted.
    let (f1, precision, recall) = f1_from_counts(0, 0, positives);
    let mut best = MaxF1 {
        f1,
        delta: order[0].confidence,
        precision,
        recall,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut predicted_pos = 0usize;
    let mut k = 0;
    while k < order.len() {
        let level = order[k].confidence;
        while k < order.len() && order[k].confidence == level {
            let o = order[k];
            if o.localized(gamma) {
                tp += 1;
            } else {
                fp += 1;
            }
            if o.positive {
                predicted_pos += 1;
            }
            k += 1;
        }
        // Everything above the next observed level (or all, at -inf) is predicted.
        let delta = order.get(k).map_or(f64::NEG_INFINITY, |o| o.confidence);
        let (f1, precision, recall) = f1_from_counts(tp, fp, positives - predicted_pos);
        if f1 > best.f1 {
            best = MaxF1 {
                f1,
                delta,
                precision,
                recall,
            };
        }
    }
    Ok(best)
}

/// Ranking used by AP: confidence descending, ties by sample id.
pub(crate) fn ranked(outcomes: &[SampleOutcome]) -> Vec<&SampleOutcome> {
    let mut order: Vec<&SampleOutcome> = outcomes.iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    order
}

/// Area under the full, non-interpolated precision-recall curve.
///
/// Every localized positive is a hit; everything else surfaced in the ranking
/// (mislocalized positives and negatives) counts against precision.
pub fn average_precision(outcomes: &[SampleOutcome], gamma: f64) -> Result<f64> {
    let positives = count_positives(outcomes)?;
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, o) in ranked(outcomes).into_iter().enumerate() {
        if o.localized(gamma) {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / positives as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub loc_acc: f64,
    pub max_f1: f64,
    pub best_delta: f64,
    pub ap: f64,
}

pub fn summarize(outcomes: &[SampleOutcome], gamma: f64) -> Result<Summary> {
    let best = max_f1(outcomes, gamma)?;
    Ok(Summary {
        loc_acc: loc_acc(outcomes, gamma)?,
        max_f1: best.f1,
        best_delta: best.delta,
        ap: average_precision(outcomes, gamma)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(id: &str, iou: f64, conf: f64) -> SampleOutcome {
        SampleOutcome::positive(id, iou, conf)
    }

    fn neg(id: &str, conf: f64) -> SampleOutcome {
        SampleOutcome::negative(id, conf, NegativeType::AutoEasy)
    }

    #[test]
    fn classify_examples() {
        let o = pos("a", 0.6, f64::INFINITY);
        for delta in [-1e300, 0.0, 1e300] {
            assert_eq!(classify(&o, 0.5, delta), Decision::TruePositive);
        }
        assert_eq!(classify(&neg("b", 0.9), 0.5, 0.5), Decision::FalsePositive);
        assert_eq!(
            classify(&pos("c", 0.9, 0.1), 0.5, 0.5),
            Decision::FalseNegative
        );
        assert_eq!(
            classify(&pos("c", 0.1, 0.1), 0.5, 0.5),
            Decision::FalseNegative
        );
        assert_eq!(
            classify(&pos("d", 0.5, 0.9), 0.5, 0.5),
            Decision::FalsePositive
        );
        assert_eq!(classify(&neg("e", 0.1), 0.5, 0.5), Decision::TrueNegative);
    }

    #[test]
    fn loc_acc_examples() {
        let all_hit = [pos("a", 1.0, 0.0), pos("b", 1.0, 0.0), neg("n", 9.0)];
        assert_eq!(loc_acc(&all_hit, 0.5).unwrap(), 1.0);
        let all_miss = [pos("a", 0.0, 0.0), pos("b", 0.0, 0.0)];
        assert_eq!(loc_acc(&all_miss, 0.5).unwrap(), 0.0);
        let mixed = [pos("a", 0.6, 0.0), pos("b", 0.4, 0.0), pos("c", 0.7, 0.0)];
        assert!((loc_acc(&mixed, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            loc_acc(&[neg("n", 1.0)], 0.5),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn max_f1_perfect_separation() {
        let o = [
            pos("a", 1.0, 1.0),
            pos("b", 1.0, 1.0),
            neg("c", 0.0),
            neg("d", 0.0),
        ];
        let best = max_f1(&o, 0.5).unwrap();
        assert_eq!(best.f1, 1.0);
        assert!(best.delta >= 0.0 && best.delta < 1.0);
    }

    #[test]
    fn max_f1_all_mislocalized_is_zero() {
        let o = [pos("a", 0.1, 0.5), pos("b", 0.2, 0.5), neg("c", 0.5)];
        assert_eq!(max_f1(&o, 0.5).unwrap().f1, 0.0);
    }

    #[test]
    fn max_f1_handcrafted() {
        // confidences 0.9 (hit), 0.8 (neg), 0.7 (hit), 0.6 (miss)
        // delta=-inf: tp2 fp2 fn0 -> 2/3 ; delta=0.6: tp2 fp1 fn1 -> 2/3
        // delta=0.7: tp1 fp1 fn2 -> 0.4 ; delta=0.8: tp1 fp0 fn2 -> 0.5
        let o = [
            pos("a", 0.9, 0.9),
            neg("b", 0.8),
            pos("c", 0.6, 0.7),
            pos("d", 0.2, 0.6),
        ];
        let best = max_f1(&o, 0.5).unwrap();
        assert!((best.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(best.delta, 0.6);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[pos("a", 0.9, 0.3)], 0.5).unwrap(), 1.0);
        let o = [pos("a", 0.9, 0.9), neg("b", 0.95)];
        assert_eq!(average_precision(&o, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn ap_breaks_confidence_ties_by_id() {
        let o = [neg("b", 0.5), pos("a", 0.9, 0.5)];
        assert_eq!(average_precision(&o, 0.5).unwrap(), 1.0);
        let o = [neg("a", 0.5), pos("b", 0.9, 0.5)];
        assert_eq!(average_precision(&o, 0.5).unwrap(), 0.5);
    }
}
