//! Brute-force metric oracles shared by the integration tests. They follow
//! the counting definitions literally and never sort.
#![allow(dead_code)]

use slavc::metrics::{NegativeType, SampleOutcome};
use slavc::numerics::RandomSource;

pub fn is_tp(o: &SampleOutcome, gamma: f64, delta: f64) -> bool {
    o.positive && o.confidence > delta && o.iou.unwrap() > gamma
}

pub fn is_fp(o: &SampleOutcome, gamma: f64, delta: f64) -> bool {
    o.confidence > delta && !is_tp(o, gamma, delta)
}

pub fn is_fn(o: &SampleOutcome, delta: f64) -> bool {
    o.positive && o.confidence <= delta
}

pub fn oracle_loc_acc(outcomes: &[SampleOutcome], gamma: f64) -> f64 {
    let pos: Vec<_> = outcomes.iter().filter(|o| o.positive).collect();
    pos.iter().filter(|o| o.iou.unwrap() > gamma).count() as f64 / pos.len() as f64
}

pub fn oracle_f1(outcomes: &[SampleOutcome], gamma: f64, delta: f64) -> f64 {
    let tp = outcomes.iter().filter(|o| is_tp(o, gamma, delta)).count() as f64;
    let fp = outcomes.iter().filter(|o| is_fp(o, gamma, delta)).count() as f64;
    let fn_ = outcomes.iter().filter(|o| is_fn(o, delta)).count() as f64;
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Best F1 over every observed confidence and minus infinity; on ties the
/// highest threshold wins.
pub fn oracle_max_f1(outcomes: &[SampleOutcome], gamma: f64) -> (f64, f64) {
    let mut candidates: Vec<f64> = outcomes.iter().map(|o| o.confidence).collect();
    candidates.push(f64::NEG_INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &delta in &candidates {
        let f1 = oracle_f1(outcomes, gamma, delta);
        if f1 > best.0 || (f1 == best.0 && delta > best.1) {
            best = (f1, delta);
        }
    }
    best
}

/// `a` ranks before `b`: higher confidence, then smaller id.
fn before(a: &SampleOutcome, b: &SampleOutcome) -> bool {
    a.confidence > b.confidence || (a.confidence == b.confidence && a.id < b.id)
}

/// Mean over positives of the precision at each true positive's rank;
/// missed positives contribute zero.
pub fn oracle_ap(outcomes: &[SampleOutcome], gamma: f64) -> f64 {
    let positives = outcomes.iter().filter(|o| o.positive).count() as f64;
    let hit = |o: &SampleOutcome| o.positive && o.iou.unwrap() > gamma;
    let mut total = 0.0;
    for o in outcomes.iter().filter(|o| hit(o)) {
        let above: Vec<_> = outcomes.iter().filter(|p| before(p, o)).collect();
        let rank = above.len() + 1;
        let hits = above.iter().filter(|p| hit(p)).count() + 1;
        total += hits as f64 / rank as f64;
    }
    total / positives
}

/// Up to `max_len` outcomes with at least one positive, drawn from small
/// value sets so that ties in confidence and IoU at the threshold occur.
pub fn random_outcomes(rng: &mut RandomSource, max_len: usize) -> Vec<SampleOutcome> {
    let n = 1 + rng.index(max_len);
    let confidences = [0.1, 0.25, 0.5, 0.5, 0.75, 0.9];
    let ious = [0.0, 0.2, 0.5, 0.5, 0.51, 0.8, 1.0];
    let mut out: Vec<SampleOutcome> = (0..n)
        .map(|k| {
            let id = format!("s{:03}", rng.index(1000) * 100 + k);
            let conf = if rng.bernoulli(0.5) {
                confidences[rng.index(confidences.len())]
            } else {
                rng.uniform()
            };
            if rng.bernoulli(0.6) {
                let iou = if rng.bernoulli(0.5) {
                    ious[rng.index(ious.len())]
                } else {
                    rng.uniform()
                };
                SampleOutcome::positive(id, iou, conf)
            } else {
                SampleOutcome::negative(id, conf, NegativeType::Real)
            }
        })
        .collect();
    if !out.iter().any(|o| o.positive) {
        let id = out[0].id.clone();
        out[0] = SampleOutcome::positive(id, 0.7, out[0].confidence);
    }
    out
}
