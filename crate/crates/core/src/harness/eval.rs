use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    average_precision, breakdown, classify, iou, loc_acc, max_f1, prediction_set, size_bucket,
    summarize, Decision, GroundTruth, GroupKey, SampleOutcome, ThresholdMode,
};
use crate::numerics::RandomSource;
use crate::slavc::{combine_with_object_prior, LocalizationMap, DEFAULT_PRIOR_WEIGHT, DEFAULT_TAU};

use super::{
    resample_bilinear, AnnotationRecord, DatasetManifest, GroupRow, ReportConfig, ReportDocument,
};

/// Evaluation settings echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub gamma: f64,
    pub threshold: ThresholdMode,
    /// Blend weight of the audio-visual map when object-prior maps are given.
    pub ogl_weight: f64,
    /// Seed of the positive subsets paired with each negative type.
    pub seed: u64,
    /// Temperature the maps were produced with; informational.
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gamma: crate::metrics::DEFAULT_GAMMA,
            threshold: ThresholdMode::default(),
            ogl_weight: DEFAULT_PRIOR_WEIGHT,
            seed: 0,
            tau: DEFAULT_TAU,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidHyperparameter(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.ogl_weight) {
            return Err(Error::InvalidHyperparameter(format!(
                "ogl weight must lie in [0, 1], got {}",
                self.ogl_weight
            )));
        }
        self.threshold.validate()
    }
}

/// Supplies the prediction map (and optional object-prior map) for a record.
pub trait MapSource: Sync {
    fn map(&self, record: &AnnotationRecord) -> Result<LocalizationMap>;

    fn prior(&self, _record: &AnnotationRecord) -> Result<Option<LocalizationMap>> {
        Ok(None)
    }
}

/// Per-sample outcome plus whether the map had to be resampled.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub outcome: SampleOutcome,
    pub resampled: bool,
}

/// Confidence is read from the audio-visual map before any object-prior
/// blending; the prediction set comes from the blended map.
pub fn score_sample(
    record: &AnnotationRecord,
    gt: &GroundTruth,
    map: &LocalizationMap,
    prior: Option<&LocalizationMap>,
    config: &EvalConfig,
) -> Result<ScoredSample> {
    let (h, w) = (gt.height(), gt.width());
    let resampled = (map.height(), map.width()) != (h, w);
    let map = resample_bilinear(map, h, w)?;
    let confidence = map.confidence();
    let outcome = if gt.is_positive() {
        let blended;
        let scored = match prior {
            Some(p) => {
                let p = resample_bilinear(p, h, w)?;
                blended = combine_with_object_prior(&map, &p, config.ogl_weight)?;
                &blended
            }
            None => &map,
        };
        let pred = prediction_set(scored.values(), config.threshold);
        SampleOutcome {
            id: record.id.clone(),
            positive: true,
            iou: Some(iou(&pred, gt)?),
            confidence,
            size: Some(size_bucket(gt)?),
            negative_type: gt.negative_type,
        }
    } else {
        SampleOutcome::negative(record.id.clone(), confidence, gt.negative_type)
    };
    Ok(ScoredSample { outcome, resampled })
}

/// Scores every record in parallel; results keep manifest order.
pub fn score_manifest(
    manifest: &DatasetManifest,
    gts: &[GroundTruth],
    maps: &dyn MapSource,
    config: &EvalConfig,
) -> Result<Vec<ScoredSample>> {
    config.validate()?;
    if gts.len() != manifest.len() {
        return Err(Error::Structural(
            "one ground truth per record required".into(),
        ));
    }
    manifest
        .records
        .par_iter()
        .zip(gts)
        .map(|(r, gt)| {
            let map = maps.map(r)?;
            let prior = maps.prior(r)?;
            score_sample(r, gt, &map, prior.as_ref(), config)
        })
        .collect()
}

/// Assembles global metrics and size / negative-type breakdowns.
pub fn build_report(
    scored: &[ScoredSample],
    manifest: &DatasetManifest,
    config: &EvalConfig,
    with_prior: bool,
) -> Result<ReportDocument> {
    let outcomes: Vec<SampleOutcome> = scored.iter().map(|s| s.outcome.clone()).collect();
    let positives = outcomes.iter().filter(|o| o.positive).count();
    let global = if positives > 0 {
        Some(summarize(&outcomes, config.gamma)?.into())
    } else {
        None
    };
    let rng = RandomSource::new(config.seed);
    let by_size = breakdown(&outcomes, GroupKey::SizeBucket, config.gamma, &rng)?
        .into_iter()
        .map(GroupRow::from)
        .collect();
    let by_negative_type = breakdown(&outcomes, GroupKey::NegativeType, config.gamma, &rng)?
        .into_iter()
        .map(GroupRow::from)
        .collect();
    let mut notes = manifest.notes.clone();
    let resampled = scored.iter().filter(|s| s.resampled).count();
    if resampled > 0 {
        notes.push(format!(
            "{resampled} maps bilinearly resampled to {}x{}",
            manifest.height, manifest.width
        ));
    }
    Ok(ReportDocument {
        config: ReportConfig {
            gamma: config.gamma,
            delta_policy: "max-f1 over observed confidences".into(),
            threshold_mode: config.threshold.to_string(),
            ogl_weight: with_prior.then_some(config.ogl_weight),
            seed: config.seed,
            tau: config.tau,
            frame: [manifest.height, manifest.width],
        },
        positives,
        negatives: outcomes.len() - positives,
        global,
        by_size,
        by_negative_type,
        notes,
        outcomes,
    })
}

/// `n` evenly spaced points over `[lo, hi]`, rounded to 12 significant
/// decimals so that printed axes read cleanly.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                if x == 0.0 {
                    return x;
                }
                let scale = 10f64.powi(11 - x.abs().log10().floor() as i32);
                (x * scale).round() / scale
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Delta,
    Gamma,
    TopFraction,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepAxis::Delta),
            "gamma" => Ok(SweepAxis::Gamma),
            "top-fraction" => Ok(SweepAxis::TopFraction),
            _ => Err(Error::InvalidHyperparameter(format!(
                "unknown sweep axis `{s}` (delta, gamma or top-fraction)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Gamma => "gamma",
            SweepAxis::TopFraction => "top-fraction",
        })
    }
}

/// F1 at a fixed confidence threshold.
pub fn f1_at(outcomes: &[SampleOutcome], gamma: f64, delta: f64) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for o in outcomes {
        match classify(o, gamma, delta) {
            Decision::TruePositive => tp += 1,
            Decision::FalsePositive => fp += 1,
            Decision::FalseNegative => fn_ += 1,
            Decision::TrueNegative => {}
        }
    }
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f1)
}

/// CSV curve along `axis`.
///
/// `delta`: precision, recall and F1 at `points` thresholds spanning the
/// observed confidences (the lowest point sits just below the minimum so
/// that every sample is predicted). `gamma`: AP, LocAcc and max-F1 for
/// gamma in [0, 1]. `top-fraction`: the same metrics with prediction sets of
/// fraction 0.1 to 0.9, rescoring every map.
pub fn sweep(
    axis: SweepAxis,
    points: usize,
    manifest: &DatasetManifest,
    gts: &[GroundTruth],
    maps: &dyn MapSource,
    config: &EvalConfig,
) -> Result<String> {
    if points == 0 {
        return Err(Error::InvalidHyperparameter(
            "a sweep needs at least one point".into(),
        ));
    }
    let metrics_row = |outcomes: &[SampleOutcome], gamma: f64| -> Result<String> {
        Ok(format!(
            "{:.2},{:.2},{:.2}",
            super::percent(average_precision(outcomes, gamma)?),
            super::percent(loc_acc(outcomes, gamma)?),
            super::percent(max_f1(outcomes, gamma)?.f1),
        ))
    };
    let mut out = String::new();
    match axis {
        SweepAxis::Delta => {
            let scored = score_manifest(manifest, gts, maps, config)?;
            let outcomes: Vec<SampleOutcome> = scored.into_iter().map(|s| s.outcome).collect();
            if outcomes.is_empty() {
                return Err(Error::UndefinedMetric("nothing to sweep over".into()));
            }
            let lo = outcomes
                .iter()
                .map(|o| o.confidence)
                .fold(f64::INFINITY, f64::min);
            let hi = outcomes
                .iter()
                .map(|o| o.confidence)
                .fold(f64::NEG_INFINITY, f64::max);
            let below = lo - 1e-9 * lo.abs().max(1.0);
            out.push_str("delta,precision,recall,f1\n");
            for delta in linspace(below, hi, points) {
                let (p, r, f1) = f1_at(&outcomes, config.gamma, delta);
                out.push_str(&format!(
                    "{delta},{:.2},{:.2},{:.2}\n",
                    super::percent(p),
                    super::percent(r),
                    super::percent(f1)
                ));
            }
        }
        SweepAxis::Gamma => {
            let scored = score_manifest(manifest, gts, maps, config)?;
            let outcomes: Vec<SampleOutcome> = scored.into_iter().map(|s| s.outcome).collect();
            out.push_str("gamma,ap,loc_acc,max_f1\n");
            for gamma in linspace(0.0, 1.0, points) {
                out.push_str(&format!("{gamma},{}\n", metrics_row(&outcomes, gamma)?));
            }
        }
        SweepAxis::TopFraction => {
            out.push_str("top_fraction,ap,loc_acc,max_f1\n");
            for p in linspace(0.1, 0.9, points) {
                let cfg = EvalConfig {
                    threshold: ThresholdMode::TopFraction(p),
                    ..config.clone()
                };
                let scored = score_manifest(manifest, gts, maps, &cfg)?;
                let outcomes: Vec<SampleOutcome> = scored.into_iter().map(|s| s.outcome).collect();
                out.push_str(&format!("{p},{}\n", metrics_row(&outcomes, config.gamma)?));
            }
        }
    }
    Ok(out)
}
