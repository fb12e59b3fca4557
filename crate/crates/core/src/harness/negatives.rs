use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::metrics::NegativeType;
use crate::numerics::RandomSource;

use super::{AnnotationRecord, DatasetManifest};

/// Share of automated negatives drawn from same-class pairs.
pub const DEFAULT_HARD_FRACTION: f64 = 0.25;

/// Number of hard negatives among `count`: `ceil(hard_fraction * count)`,
/// with a small guard so that exact products are not bumped up by rounding.
pub fn hard_count(count: usize, hard_fraction: f64) -> usize {
    ((hard_fraction * count as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Appends `count` automated negatives built by pairing one positive's audio
/// with another positive's frame.
///
/// `hard_count(count, hard_fraction)` pairs share a class and are tagged
/// auto-hard; the rest come from different classes and are tagged
/// auto-easy. When every labelled positive shares one class no easy pair
/// exists and all generated negatives are hard. Pairs are drawn from `rng`
/// alone and never pair a sample with itself.
pub fn generate_negatives(
    manifest: &DatasetManifest,
    count: usize,
    hard_fraction: f64,
    rng: &mut RandomSource,
) -> Result<DatasetManifest> {
    if !(0.0..=1.0).contains(&hard_fraction) {
        return Err(Error::InvalidHyperparameter(format!(
            "hard fraction must lie in [0, 1], got {hard_fraction}"
        )));
    }
    let mut out = manifest.clone();
    if count == 0 {
        return Ok(out);
    }
    // Labelled positives grouped by class, in a fixed order.
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, r) in manifest.records.iter().enumerate() {
        if let (false, Some(c)) = (r.negative, r.class.as_deref()) {
            by_class.entry(c).or_default().push(k);
        }
    }
    let pairable: Vec<&Vec<usize>> = by_class.values().filter(|v| v.len() >= 2).collect();
    let labelled: Vec<usize> = by_class.values().flatten().copied().collect();
    let mut hard = hard_count(count, hard_fraction);
    if by_class.len() < 2 {
        hard = count;
    }
    if hard > 0 && pairable.is_empty() {
        return Err(Error::ContractViolation(
            "hard negatives need a class with at least two labelled positives".into(),
        ));
    }
    let hard_pool: Vec<usize> = pairable.iter().flat_map(|v| v.iter().copied()).collect();
    let class_of = |k: usize| manifest.records[k].class.as_deref().unwrap_or_default();

    let mut taken: HashSet<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    let mut serial = 0usize;
    let mut fresh_id = |kind: &str, taken: &mut HashSet<String>| loop {
        serial += 1;
        let id = format!("{kind}-{serial:06}");
        if taken.insert(id.clone()) {
            return id;
        }
    };

    for n in 0..count {
        let is_hard = n < hard;
        let (audio, video) = if is_hard {
            let a = hard_pool[rng.index(hard_pool.len())];
            let same = &by_class[class_of(a)];
            let mut v = same[rng.index(same.len() - 1)];
            if v == a {
                v = *same.last().unwrap();
            }
            (a, v)
        } else {
            let a = labelled[rng.index(labelled.len())];
            let others: Vec<usize> = labelled
                .iter()
                .copied()
                .filter(|&k| class_of(k) != class_of(a))
                .collect();
            (a, others[rng.index(others.len())])
        };
        let kind = if is_hard {
            NegativeType::AutoHard
        } else {
            NegativeType::AutoEasy
        };
        let video_rec = &manifest.records[video];
        out.records.push(AnnotationRecord {
            id: fresh_id(kind.as_str(), &mut taken),
            class: video_rec.class.clone(),
            boxes: vec![],
            negative: true,
            negative_type: kind,
            audio_id: Some(manifest.records[audio].id.clone()),
            video_id: Some(video_rec.id.clone()),
        });
    }
    out.notes.push(format!(
        "appended {count} automated negatives ({hard} hard) with seed {}",
        rng.seed()
    ));
    Ok(out)
}
