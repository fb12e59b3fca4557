use crate::error::{Error, Result};

use super::{Grid, RandomSource};

/// Norm below which a vector is treated as dead.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub value: f64,
    /// Set when either input had (near) zero norm; `value` is then 0.
    pub degenerate: bool,
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<Similarity> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::Structural(format!(
            "cosine similarity needs equal nonzero dimensions, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu < DEGENERATE_NORM || nv < DEGENERATE_NORM {
        return Ok(Similarity {
            value: 0.0,
            degenerate: true,
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(Similarity {
        value: (dot / (nu * nv)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Numerically stable `ln Σ exp(x)`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values
        .into_iter()
        .map(|v| (v - max).exp())
        .sum::<f64>()
        .ln()
}

/// Softmax of `logits / tau`, normalizing jointly over the axes in `axes`.
pub fn softmax(logits: &Grid, axes: &[usize], tau: f64) -> Result<Grid> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let shape = logits.shape();
    if axes.is_empty() || axes.iter().any(|&a| a >= shape.len()) {
        return Err(Error::Structural(format!(
            "softmax axes {axes:?} invalid for shape {shape:?}"
        )));
    }

    // Group id of every entry: its coordinates on the axes that are kept.
    let groups = shape
        .iter()
        .enumerate()
        .filter(|(a, _)| !axes.contains(a))
        .map(|(_, &n)| n)
        .product::<usize>();
    let group_of = |flat: usize| -> usize {
        let coords = logits.unravel(flat);
        coords
            .iter()
            .zip(shape)
            .enumerate()
            .filter(|(a, _)| !axes.contains(a))
            .fold(0, |acc, (_, (&c, &n))| acc * n + c)
    };
    let ids: Vec<usize> = (0..logits.len()).map(group_of).collect();

    let mut max = vec![f64::NEG_INFINITY; groups];
    for (&g, &v) in ids.iter().zip(logits.data()) {
        max[g] = max[g].max(v / tau);
    }
    let mut out: Vec<f64> = ids
        .iter()
        .zip(logits.data())
        .map(|(&g, &v)| (v / tau - max[g]).exp())
        .collect();
    let mut total = vec![0.0; groups];
    for (&g, &e) in ids.iter().zip(&out) {
        total[g] += e;
    }
    for (&g, e) in ids.iter().zip(out.iter_mut()) {
        *e /= total[g];
    }
    Grid::new(shape.to_vec(), out)
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask(shape: &[usize], rate: f64, rng: &mut RandomSource) -> Result<Grid> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidHyperparameter(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    let n: usize = shape.iter().product();
    if rate == 0.0 {
        return Grid::new(shape.to_vec(), vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..n)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Grid::new(shape.to_vec(), data)
}

/// `target <- m * target + (1 - m) * online`, per scalar.
pub fn ema_update(target: &mut [Grid], online: &[Grid], m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::InvalidHyperparameter(format!(
            "momentum must lie in [0, 1], got {m}"
        )));
    }
    if target.len() != online.len()
        || target
            .iter()
            .zip(online)
            .any(|(t, o)| t.shape() != o.shape())
    {
        return Err(Error::Structural(
            "EMA target and online parameters differ in shape".into(),
        ));
    }
    for (t, o) in target.iter_mut().zip(online) {
        for (tv, &ov) in t.data_mut().iter_mut().zip(o.data()) {
            *tv = m * *tv + (1.0 - m) * ov;
        }
    }
    Ok(())
}
