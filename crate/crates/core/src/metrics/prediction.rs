use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Grid;

use super::GroundTruth;

/// How a score map is turned into a set of predicted pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThresholdMode {
    /// Pixels with score strictly above `alpha`.
    Absolute(f64),
    /// The `ceil(p * H * W)` highest-scoring pixels.
    TopFraction(f64),
    /// Absolute threshold at the midpoint of the map's range.
    HalfRange,
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::TopFraction(0.5)
    }
}

impl ThresholdMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdMode::Absolute(a) if !a.is_finite() => Err(Error::InvalidHyperparameter(
                format!("absolute threshold must be finite, got {a}"),
            )),
            ThresholdMode::TopFraction(p) if !(p > 0.0 && p <= 1.0) => Err(
                Error::InvalidHyperparameter(format!("top fraction must lie in (0, 1], got {p}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Absolute(a) => write!(f, "absolute:{a}"),
            ThresholdMode::TopFraction(p) => write!(f, "top-fraction:{p}"),
            ThresholdMode::HalfRange => f.write_str("half-range"),
        }
    }
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidHyperparameter(format!(
                "threshold mode `{s}` (expected absolute:A, top-fraction:P or half-range)"
            ))
        };
        if s == "half-range" {
            return Ok(ThresholdMode::HalfRange);
        }
        let (name, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.parse().map_err(|_| bad())?;
        match name {
            "absolute" if value.is_finite() => Ok(ThresholdMode::Absolute(value)),
            "top-fraction" if value > 0.0 && value <= 1.0 => Ok(ThresholdMode::TopFraction(value)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ThresholdMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ThresholdMode> for String {
    fn from(m: ThresholdMode) -> String {
        m.to_string()
    }
}

/// Number of cells kept by a top-fraction prediction: `ceil(p * n)`, at least 1.
pub(crate) fn top_count(p: f64, n: usize) -> usize {
    // Guard against products such as 0.5 * 50176 landing one ulp above an integer.
    let k = (p * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Flat row-major indices of the predicted pixels, ascending.
pub fn prediction_set(map: &Grid, mode: ThresholdMode) -> Vec<usize> {
    let values = map.data();
    let above = |alpha: f64| -> Vec<usize> {
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > alpha)
            .map(|(i, _)| i)
            .collect()
    };
    match mode {
        ThresholdMode::Absolute(alpha) => above(alpha),
        ThresholdMode::HalfRange => above((map.max() + map.min()) / 2.0),
        ThresholdMode::TopFraction(p) => {
            let k = top_count(p, values.len());
            let mut order: Vec<usize> = (0..values.len()).collect();
            let by_score = |a: &usize, b: &usize| -> Ordering {
                values[*b]
                    .partial_cmp(&values[*a])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(b))
            };
            if k < order.len() {
                order.select_nth_unstable_by(k - 1, by_score);
                order.truncate(k);
            }
            order.sort_unstable();
            order
        }
    }
}

/// Consensus IoU: `sum_{pred} g / (sum_{G} g + |pred \ G|)`.
pub fn iou(pred: &[usize], gt: &GroundTruth) -> Result<f64> {
    if !gt.is_positive() {
        return Err(Error::ContractViolation(
            "IoU is undefined for a negative sample".into(),
        ));
    }
    let g = gt.weights().data();
    let mut hit = 0.0;
    let mut outside = 0usize;
    for &i in pred {
        let w = *g.get(i).ok_or_else(|| {
            Error::Structural(format!("predicted pixel {i} outside the ground-truth grid"))
        })?;
        if w > 0.0 {
            hit += w;
        } else {
            outside += 1;
        }
    }
    let mass: f64 = g.iter().sum();
    Ok((hit / (mass + outside as f64)).clamp(0.0, 1.0))
}
