use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, Grid};

use super::Bag;

/// Default weight of the audio-visual map when blending with an object prior.
pub const DEFAULT_PRIOR_WEIGHT: f64 = 0.4;

/// An `H x W` localization score map and its confidence (the map maximum).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationMap {
    values: Grid,
    confidence: f64,
}

impl LocalizationMap {
    pub fn new(values: Grid) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::Structural(format!(
                "localization maps are 2-D, got shape {:?}",
                values.shape()
            )));
        }
        let confidence = values.max();
        Ok(LocalizationMap { values, confidence })
    }

    pub fn from_rows(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Grid::new(vec![height, width], data)?)
    }

    pub fn values(&self) -> &Grid {
        &self.values
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }

    /// `(row, col)` of the maximum, lowest row-major index on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let flat = self.values.argmax();
        (flat / self.width(), flat % self.width())
    }

    /// Rescales to `[0, 1]`; a constant map becomes all zeros.
    pub fn min_max_normalized(&self) -> Result<Self> {
        let lo = self.values.min();
        let hi = self.values.max();
        let span = hi - lo;
        let g = if span > 0.0 {
            self.values.map(|v| ((v - lo) / span).clamp(0.0, 1.0))?
        } else {
            self.values.map(|_| 0.0)?
        };
        Self::new(g)
    }
}

/// Which heads contribute to the inference map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// Localization head only.
    Loc,
    /// Correspondence head only.
    Avc,
    /// Sum of both heads.
    #[default]
    Both,
}

/// Sum of the localization-head and correspondence-head cosine maps.
pub fn inference_map(
    audio_loc: &[f64],
    audio_avc: &[f64],
    bag_loc: Bag<'_>,
    bag_avc: Bag<'_>,
) -> Result<LocalizationMap> {
    inference_map_with(InferenceMode::Both, audio_loc, audio_avc, bag_loc, bag_avc)
}

pub fn inference_map_with(
    mode: InferenceMode,
    audio_loc: &[f64],
    audio_avc: &[f64],
    bag_loc: Bag<'_>,
    bag_avc: Bag<'_>,
) -> Result<LocalizationMap> {
    if bag_loc.height != bag_avc.height || bag_loc.width != bag_avc.width {
        return Err(Error::Structural(
            "localization and correspondence bags differ in extent".into(),
        ));
    }
    let mut values = Vec::with_capacity(bag_loc.cells());
    for c in 0..bag_loc.cells() {
        let mut s = 0.0;
        if mode != InferenceMode::Avc {
            s += cosine_similarity(audio_loc, bag_loc.cell(c))?.value;
        }
        if mode != InferenceMode::Loc {
            s += cosine_similarity(audio_avc, bag_avc.cell(c))?.value;
        }
        values.push(s);
    }
    LocalizationMap::from_rows(bag_loc.height, bag_loc.width, values)
}

/// Blends min-max normalized audio-visual and object-prior maps:
/// `weight * avl + (1 - weight) * prior`.
pub fn combine_with_object_prior(
    avl: &LocalizationMap,
    prior: &LocalizationMap,
    weight: f64,
) -> Result<LocalizationMap> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidHyperparameter(format!(
            "prior weight must lie in [0, 1], got {weight}"
        )));
    }
    if avl.values.shape() != prior.values.shape() {
        return Err(Error::Structural(format!(
            "map shapes differ: {:?} vs {:?}",
            avl.values.shape(),
            prior.values.shape()
        )));
    }
    let a = avl.min_max_normalized()?;
    let p = prior.min_max_normalized()?;
    let data = a
        .values
        .data()
        .iter()
        .zip(p.values.data())
        .map(|(x, y)| weight * x + (1.0 - weight) * y)
        .collect();
    LocalizationMap::from_rows(avl.height(), avl.width(), data)
}

/// Mean, over supervised samples, of the squared L2 distance between the
/// predicted map and the ground-truth map.
pub fn semi_supervised_loss(
    predictions: &[Grid],
    targets: &[Grid],
    supervised: &[bool],
) -> Result<f64> {
    if predictions.len() != targets.len() || predictions.len() != supervised.len() {
        return Err(Error::Structural(
            "predictions, targets and flags must have equal length".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, g), &flag) in predictions.iter().zip(targets).zip(supervised) {
        if !flag {
            continue;
        }
        if p.shape() != g.shape() {
            return Err(Error::Structural(format!(
                "map shapes differ: {:?} vs {:?}",
                p.shape(),
                g.shape()
            )));
        }
        total += p
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "semi-supervised loss needs at least one supervised sample".into(),
        ));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn aligned_and_orthogonal_maps() {
        let audio = [1.0, 0.0];
        let cells = [2.0, 0.0, 0.5, 0.0];
        let bag = Bag::new(&cells, 1, 2, 2).unwrap();
        let m = inference_map(&audio, &audio, bag, bag).unwrap();
        assert_eq!(m.values().data(), &[2.0, 2.0]);
        assert_eq!(m.confidence(), 2.0);

        let orth = [0.0, 1.0, 0.0, -3.0];
        let bag = Bag::new(&orth, 2, 1, 2).unwrap();
        let m = inference_map(&audio, &audio, bag, bag).unwrap();
        assert_eq!(m.values().data(), &[0.0, 0.0]);
    }

    #[test]
    fn single_head_modes() {
        let loc = [1.0, 0.0];
        let avc = [0.0, 1.0];
        let cells = [1.0, 0.0];
        let bag = Bag::new(&cells, 1, 1, 2).unwrap();
        assert_eq!(
            inference_map_with(InferenceMode::Loc, &loc, &avc, bag, bag)
                .unwrap()
                .confidence(),
            1.0
        );
        assert_eq!(
            inference_map_with(InferenceMode::Avc, &loc, &avc, bag, bag)
                .unwrap()
                .confidence(),
            0.0
        );
    }

    #[test]
    fn prior_combination() {
        let avl = LocalizationMap::from_rows(1, 3, vec![0.0, 0.2, 1.0]).unwrap();
        let prior = LocalizationMap::from_rows(1, 3, vec![0.0, 0.8, 1.0]).unwrap();
        let w1 = combine_with_object_prior(&avl, &prior, 1.0).unwrap();
        assert_eq!(w1.values().data(), &[0.0, 0.2, 1.0]);
        let w0 = combine_with_object_prior(&avl, &prior, 0.0).unwrap();
        assert_eq!(w0.values().data(), &[0.0, 0.8, 1.0]);
        let half = combine_with_object_prior(&avl, &prior, 0.5).unwrap();
        assert_abs_diff_eq!(half.values().data()[1], 0.5, epsilon = 1e-15);

        assert!(combine_with_object_prior(&avl, &prior, 1.5).is_err());
        let small = LocalizationMap::from_rows(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(combine_with_object_prior(&avl, &small, 0.5).is_err());
    }

    #[test]
    fn semi_supervised_examples() {
        let p = Grid::new(vec![1, 1], vec![1.0]).unwrap();
        let g = Grid::new(vec![1, 1], vec![0.0]).unwrap();
        assert_eq!(
            semi_supervised_loss(&[p.clone()], &[g.clone()], &[true]).unwrap(),
            1.0
        );
        assert_eq!(
            semi_supervised_loss(&[p.clone()], &[p.clone()], &[true]).unwrap(),
            0.0
        );
        assert!(matches!(
            semi_supervised_loss(&[p], &[g], &[false]),
            Err(Error::UndefinedMetric(_))
        ));
    }
}
