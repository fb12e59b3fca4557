use crate::error::Result;
use crate::numerics::RandomSource;

use super::SyntheticSpec;

/// One audio/frame pair of raw encoder features.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    /// `raw_dim` values.
    pub audio: Vec<f64>,
    /// `cells * raw_dim` values, cells in row-major order.
    pub visual: Vec<f64>,
    /// Class shown in the frame at the planted cell.
    pub class: usize,
    /// Class the audio was drawn from; differs from `class` for negatives.
    pub audio_class: usize,
    pub planted: (usize, usize),
}

impl RawSample {
    pub fn is_positive(&self) -> bool {
        self.class == self.audio_class
    }

    pub fn planted_cell(&self, width: usize) -> usize {
        self.planted.0 * width + self.planted.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawBatch {
    pub height: usize,
    pub width: usize,
    pub raw_dim: usize,
    pub samples: Vec<RawSample>,
}

impl RawBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Sub-batch holding the samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RawBatch {
        RawBatch {
            height: self.height,
            width: self.width,
            raw_dim: self.raw_dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

fn unit_vector(dim: usize, rng: &mut RandomSource) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

/// Unit-norm class signatures.
pub fn signatures(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let mut rng = RandomSource::new(spec.signature_seed);
    (0..spec.classes)
        .map(|_| unit_vector(spec.raw_dim, &mut rng))
        .collect()
}

fn noisy(signature: &[f64], sigma: f64, rng: &mut RandomSource) -> Vec<f64> {
    let scale = sigma / (signature.len() as f64).sqrt();
    signature
        .iter()
        .map(|&s| {
            if sigma > 0.0 {
                s + scale * rng.normal()
            } else {
                s
            }
        })
        .collect()
}

fn other_class(classes: usize, exclude: &[usize], rng: &mut RandomSource) -> Option<usize> {
    let pool: Vec<usize> = (0..classes).filter(|c| !exclude.contains(c)).collect();
    (!pool.is_empty()).then(|| pool[rng.index(pool.len())])
}

/// Draws `n` planted-source samples.
///
/// Each frame shows its class signature at a uniformly drawn cell, other
/// classes' signatures at `spec.distractors` further cells and clutter (a
/// fresh random unit vector per cell) everywhere else. For
/// `round(negative_fraction * n)` randomly placed samples the audio is drawn
/// from a class absent from the frame, making the pair a negative.
pub fn make_synthetic_batch(
    spec: &SyntheticSpec,
    n: usize,
    negative_fraction: f64,
    rng: &mut RandomSource,
) -> Result<RawBatch> {
    spec.validate()?;
    let sigs = signatures(spec);
    let cells = spec.cells();
    let negatives = (negative_fraction * n as f64).round() as usize;
    let mut is_negative = vec![false; n];
    if negatives > 0 {
        is_negative[..negatives].fill(true);
        rng.shuffle(&mut is_negative);
    }
    let mut samples = Vec::with_capacity(n);
    for &negative in &is_negative {
        let class = rng.index(spec.classes);
        let cell = rng.index(cells);
        let audio_class = if negative {
            other_class(spec.classes, &[class], rng).expect("at least two classes")
        } else {
            class
        };
        let mut content: Vec<Option<usize>> = vec![None; cells];
        content[cell] = Some(class);
        let free: Vec<usize> = (0..cells).filter(|&c| c != cell).collect();
        let mut order = free;
        rng.shuffle(&mut order);
        for &c in order.iter().take(spec.distractors) {
            content[c] = other_class(spec.classes, &[class, audio_class], rng);
        }
        let mut visual = Vec::with_capacity(cells * spec.raw_dim);
        for &k in &content {
            match k {
                Some(k) => visual.extend(noisy(&sigs[k], spec.noise, rng)),
                None => visual.extend(unit_vector(spec.raw_dim, rng)),
            }
        }
        samples.push(RawSample {
            audio: noisy(&sigs[audio_class], spec.noise, rng),
            visual,
            class,
            audio_class,
            planted: (cell / spec.width, cell % spec.width),
        });
    }
    Ok(RawBatch {
        height: spec.height,
        width: spec.width,
        raw_dim: spec.raw_dim,
        samples,
    })
}
