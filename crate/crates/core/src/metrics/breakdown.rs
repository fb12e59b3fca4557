use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

use super::{summarize, NegativeType, SampleOutcome, SizeBucket, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKey {
    SizeBucket,
    NegativeType,
}

/// Metrics for one subset of outcomes, with the ids that formed it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub positives: usize,
    pub negatives: usize,
    /// `None` when the group holds no positive sample.
    pub summary: Option<Summary>,
    pub members: Vec<String>,
}

pub fn summarize_group(
    group: impl Into<String>,
    members: &[&SampleOutcome],
    gamma: f64,
) -> Result<GroupMetrics> {
    let owned: Vec<SampleOutcome> = members.iter().map(|&o| o.clone()).collect();
    let positives = owned.iter().filter(|o| o.positive).count();
    let summary = if positives > 0 {
        Some(summarize(&owned, gamma)?)
    } else {
        None
    };
    Ok(GroupMetrics {
        group: group.into(),
        positives,
        negatives: owned.len() - positives,
        summary,
        members: owned.into_iter().map(|o| o.id).collect(),
    })
}

/// Per-group metrics.
///
/// Size buckets group positive samples by ground-truth area; every bucket is
/// listed, empty ones without a summary. Negative-type groups pair each
/// negative subset with an equal number of positives drawn uniformly without
/// replacement from `rng` (fewer if not enough positives exist).
pub fn breakdown(
    outcomes: &[SampleOutcome],
    key: GroupKey,
    gamma: f64,
    rng: &RandomSource,
) -> Result<Vec<GroupMetrics>> {
    match key {
        GroupKey::SizeBucket => SizeBucket::ALL
            .iter()
            .map(|&bucket| {
                let members: Vec<&SampleOutcome> = outcomes
                    .iter()
                    .filter(|o| o.positive && o.size == Some(bucket))
                    .collect();
                summarize_group(bucket.as_str(), &members, gamma)
            })
            .collect(),
        GroupKey::NegativeType => {
            let positives: Vec<&SampleOutcome> = outcomes.iter().filter(|o| o.positive).collect();
            let mut groups = Vec::new();
            for (k, kind) in [
                NegativeType::Real,
                NegativeType::AutoEasy,
                NegativeType::AutoHard,
            ]
            .into_iter()
            .enumerate()
            {
                let negatives: Vec<&SampleOutcome> = outcomes
                    .iter()
                    .filter(|o| !o.positive && o.negative_type == kind)
                    .collect();
                if negatives.is_empty() {
                    continue;
                }
                if positives.is_empty() {
                    return Err(Error::EmptyGroup(format!(
                        "no positives available to pair with `{}` negatives",
                        kind.as_str()
                    )));
                }
                let take = negatives.len().min(positives.len());
                let mut stream = rng.derive(k as u64);
                let mut picked = stream.sample_without_replacement(positives.len(), take);
                picked.sort_unstable();
                let mut members: Vec<&SampleOutcome> =
                    picked.into_iter().map(|i| positives[i]).collect();
                members.extend(negatives);
                groups.push(summarize_group(kind.as_str(), &members, gamma)?);
            }
            Ok(groups)
        }
    }
}
