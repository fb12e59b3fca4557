use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_precision, SampleOutcome, DEFAULT_GAMMA};
use crate::numerics::{ema_update, RandomSource};
use crate::slavc::{inference_map_with, loss_and_grad, InferenceMode, LocalizationMap, LossKind};

use super::{make_synthetic_batch, EncoderPairState, RawBatch, SyntheticSpec, TrainConfig};

/// One record per finished epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's steps.
    pub loss: f64,
    pub planted_accuracy: f64,
    /// Heldout AP on the 0-1 scale.
    pub heldout_ap: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: EncoderPairState,
    pub trace: Vec<TraceRecord>,
}

/// A failed run, with the trace recorded up to the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub trace: Vec<TraceRecord>,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} epochs)", self.error, self.trace.len())
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure {
            error,
            trace: vec![],
        }
    }
}

/// Heads that carry a trained signal for `loss`.
pub fn inference_mode_for(loss: LossKind) -> InferenceMode {
    match loss {
        LossKind::Micl => InferenceMode::Loc,
        LossKind::Slavc | LossKind::Full => InferenceMode::Both,
    }
}

/// Training and heldout splits of the planted-source task for `seed`.
pub fn synthetic_splits(spec: &SyntheticSpec, seed: u64) -> Result<(RawBatch, RawBatch)> {
    let root = RandomSource::new(seed);
    let train = make_synthetic_batch(spec, spec.train_size, 0.0, &mut root.derive(1))?;
    let heldout = make_synthetic_batch(
        spec,
        spec.heldout_size,
        spec.negative_fraction,
        &mut root.derive(2),
    )?;
    Ok((train, heldout))
}

/// Runs the full optimization loop on a fresh draw of the planted-source
/// task.
pub fn train(
    config: &TrainConfig,
    spec: &SyntheticSpec,
) -> std::result::Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    spec.validate()?;
    let (train_set, heldout) = synthetic_splits(spec, config.seed)?;
    train_on(config, &train_set, &heldout)
}

/// Optimization loop over explicit splits.
pub fn train_on(
    config: &TrainConfig,
    train_set: &RawBatch,
    heldout: &RawBatch,
) -> std::result::Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    let root = RandomSource::new(config.seed);
    let mut state =
        EncoderPairState::init(train_set.raw_dim, config.embed_dim, &mut root.derive(3))?;
    state.inference = inference_mode_for(config.loss);
    let mut order_rng = root.derive(4);
    let mut mask_rng = root.derive(5);
    let hyper = config.hyper();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = train_set.select(chunk);
            let masks = state.draw_masks(&batch, config, &mut mask_rng)?;
            let (online, momentum) = state.forward_with_masks(&batch, Some(&masks))?;
            let (loss, grad) = loss_and_grad(config.loss, &online, &momentum, &hyper)?;
            step += 1;
            if !loss.is_finite() {
                return Err(TrainFailure {
                    error: Error::Divergence {
                        epoch,
                        step,
                        value: loss,
                    },
                    trace,
                });
            }
            let grads = state.backward(&batch, Some(&masks), &grad)?;
            super::adam_step(&mut state, &grads, config).map_err(|error| TrainFailure {
                error,
                trace: trace.clone(),
            })?;
            ema_update(&mut state.momentum, &state.online, config.momentum)?;
            total += loss;
            steps += 1;
        }
        state.epoch = epoch;
        let outcomes = heldout_outcomes(&state, heldout)?;
        trace.push(TraceRecord {
            epoch,
            loss: if steps > 0 { total / steps as f64 } else { 0.0 },
            planted_accuracy: accuracy_of(&outcomes)?,
            heldout_ap: average_precision(&outcomes, DEFAULT_GAMMA)?,
        });
    }
    Ok(TrainOutcome { state, trace })
}

/// Localization map of each sample's own audio against its own frame,
/// computed from momentum features.
pub fn localization_maps(
    state: &EncoderPairState,
    batch: &RawBatch,
) -> Result<Vec<LocalizationMap>> {
    let (_, momentum) = state.forward_with_masks(batch, None)?;
    (0..batch.len())
        .into_par_iter()
        .map(|i| {
            inference_map_with(
                state.inference,
                momentum.audio_loc(i),
                momentum.audio_avc(i),
                momentum.bag_loc(i),
                momentum.bag_avc(i),
            )
        })
        .collect()
}

/// Per-sample outcomes for a planted-source set: the prediction is the
/// argmax cell, so IoU against the planted cell is 1 or 0.
pub fn heldout_outcomes(
    state: &EncoderPairState,
    heldout: &RawBatch,
) -> Result<Vec<SampleOutcome>> {
    planted_outcomes(heldout, &localization_maps(state, heldout)?)
}

/// Scores arbitrary maps (one per sample, at grid resolution) against the
/// planted cells, the same way [`heldout_outcomes`] scores a model.
pub fn planted_outcomes(
    heldout: &RawBatch,
    maps: &[LocalizationMap],
) -> Result<Vec<SampleOutcome>> {
    if maps.len() != heldout.len() {
        return Err(Error::Structural(format!(
            "{} maps for {} samples",
            maps.len(),
            heldout.len()
        )));
    }
    if let Some(m) = maps
        .iter()
        .find(|m| (m.height(), m.width()) != (heldout.height, heldout.width))
    {
        return Err(Error::Structural(format!(
            "map is {}x{}, grid is {}x{}",
            m.height(),
            m.width(),
            heldout.height,
            heldout.width
        )));
    }
    Ok(heldout
        .samples
        .iter()
        .zip(maps)
        .enumerate()
        .map(|(i, (s, map))| {
            let id = format!("{i:06}");
            if s.is_positive() {
                let (r, c) = map.argmax();
                let hit = (r, c) == s.planted;
                SampleOutcome::positive(id, if hit { 1.0 } else { 0.0 }, map.confidence())
            } else {
                SampleOutcome::negative(
                    id,
                    map.confidence(),
                    crate::metrics::NegativeType::AutoEasy,
                )
            }
        })
        .collect())
}

fn accuracy_of(outcomes: &[SampleOutcome]) -> Result<f64> {
    let positives: Vec<_> = outcomes.iter().filter(|o| o.positive).collect();
    if positives.is_empty() {
        return Err(Error::UndefinedMetric(
            "heldout set has no positive samples".into(),
        ));
    }
    let hits = positives.iter().filter(|o| o.iou == Some(1.0)).count();
    Ok(hits as f64 / positives.len() as f64)
}

/// Fraction of positive heldout samples whose map peaks at the planted cell
/// (ties resolved to the lowest row-major index).
pub fn planted_accuracy(state: &EncoderPairState, heldout: &RawBatch) -> Result<f64> {
    accuracy_of(&heldout_outcomes(state, heldout)?)
}
