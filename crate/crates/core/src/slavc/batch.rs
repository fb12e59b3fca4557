use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub tau: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { tau: DEFAULT_TAU }
    }
}

impl Hyper {
    pub fn new(tau: f64) -> Result<Self> {
        let h = Hyper { tau };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau > 0.0 && self.tau.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidHyperparameter(format!(
                "temperature must be positive, got {}",
                self.tau
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Online,
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BatchDims {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub dim: usize,
}

impl BatchDims {
    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    fn audio_len(&self) -> usize {
        self.batch * self.dim
    }

    fn visual_len(&self) -> usize {
        self.batch * self.cells() * self.dim
    }
}

/// A spatial bag of visual vectors, `height * width` cells of `dim` entries.
#[derive(Clone, Copy, Debug)]
pub struct Bag<'a> {
    pub data: &'a [f64],
    pub height: usize,
    pub width: usize,
    pub dim: usize,
}

impl<'a> Bag<'a> {
    pub fn new(data: &'a [f64], height: usize, width: usize, dim: usize) -> Result<Self> {
        if height * width == 0 || dim == 0 {
            return Err(Error::Structural("empty visual bag".into()));
        }
        if data.len() != height * width * dim {
            return Err(Error::Structural(format!(
                "bag of {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                data.len()
            )));
        }
        Ok(Bag {
            data,
            height,
            width,
            dim,
        })
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn cell(&self, c: usize) -> &'a [f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }
}

/// Projected embeddings for a batch: one audio vector and one `H x W` grid of
/// visual vectors per sample, in both the localization and the
/// correspondence head.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBatch {
    dims: BatchDims,
    pub branch: Branch,
    /// `batch x dim`
    pub audio_loc: Vec<f64>,
    pub audio_avc: Vec<f64>,
    /// `batch x cells x dim`
    pub visual_loc: Vec<f64>,
    pub visual_avc: Vec<f64>,
}

impl EmbeddingBatch {
    pub fn new(
        dims: BatchDims,
        branch: Branch,
        audio_loc: Vec<f64>,
        audio_avc: Vec<f64>,
        visual_loc: Vec<f64>,
        visual_avc: Vec<f64>,
    ) -> Result<Self> {
        if dims.batch == 0 || dims.cells() == 0 || dims.dim == 0 {
            return Err(Error::Structural(format!("degenerate batch dims {dims:?}")));
        }
        for (name, v, n) in [
            ("audio_loc", &audio_loc, dims.audio_len()),
            ("audio_avc", &audio_avc, dims.audio_len()),
            ("visual_loc", &visual_loc, dims.visual_len()),
            ("visual_avc", &visual_avc, dims.visual_len()),
        ] {
            if v.len() != n {
                return Err(Error::Structural(format!(
                    "{name} has {} values, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Structural(format!("{name} has non-finite entries")));
            }
        }
        Ok(EmbeddingBatch {
            dims,
            branch,
            audio_loc,
            audio_avc,
            visual_loc,
            visual_avc,
        })
    }

    /// Both heads share the same vectors; the single-head path of the
    /// multiple-instance baseline reads the localization head.
    pub fn single_head(dims: BatchDims, audio: Vec<f64>, visual: Vec<f64>) -> Result<Self> {
        Self::new(
            dims,
            Branch::Online,
            audio.clone(),
            audio,
            visual.clone(),
            visual,
        )
    }

    pub fn dims(&self) -> BatchDims {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims.batch
    }

    pub fn audio_loc(&self, i: usize) -> &[f64] {
        let d = self.dims.dim;
        &self.audio_loc[i * d..(i + 1) * d]
    }

    pub fn audio_avc(&self, i: usize) -> &[f64] {
        let d = self.dims.dim;
        &self.audio_avc[i * d..(i + 1) * d]
    }

    pub fn bag_loc(&self, j: usize) -> Bag<'_> {
        self.bag(&self.visual_loc, j)
    }

    pub fn bag_avc(&self, j: usize) -> Bag<'_> {
        self.bag(&self.visual_avc, j)
    }

    fn bag<'a>(&self, data: &'a [f64], j: usize) -> Bag<'a> {
        let n = self.dims.cells() * self.dims.dim;
        Bag {
            data: &data[j * n..(j + 1) * n],
            height: self.dims.height,
            width: self.dims.width,
            dim: self.dims.dim,
        }
    }

    /// All coordinates in the order audio_loc, audio_avc, visual_loc, visual_avc.
    pub fn to_flat(&self) -> Vec<f64> {
        [
            &self.audio_loc[..],
            &self.audio_avc[..],
            &self.visual_loc[..],
            &self.visual_avc[..],
        ]
        .concat()
    }

    pub fn from_flat(dims: BatchDims, branch: Branch, flat: &[f64]) -> Result<Self> {
        let (a, v) = (dims.audio_len(), dims.visual_len());
        if flat.len() != 2 * a + 2 * v {
            return Err(Error::Structural(format!(
                "flat embedding has {} values, expected {}",
                flat.len(),
                2 * a + 2 * v
            )));
        }
        Self::new(
            dims,
            branch,
            flat[..a].to_vec(),
            flat[a..2 * a].to_vec(),
            flat[2 * a..2 * a + v].to_vec(),
            flat[2 * a + v..].to_vec(),
        )
    }

    pub(crate) fn same_shape(&self, other: &EmbeddingBatch) -> bool {
        self.dims == other.dims
    }

    /// Reorders samples: sample `k` of the result is sample `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.dims.batch {
            return Err(Error::Structural("permutation length mismatch".into()));
        }
        let d = self.dims.dim;
        let n = self.dims.cells() * d;
        let pick = |src: &[f64], stride: usize| -> Vec<f64> {
            order
                .iter()
                .flat_map(|&i| src[i * stride..(i + 1) * stride].iter().copied())
                .collect()
        };
        Self::new(
            self.dims,
            self.branch,
            pick(&self.audio_loc, d),
            pick(&self.audio_avc, d),
            pick(&self.visual_loc, n),
            pick(&self.visual_avc, n),
        )
    }
}

/// Gradient of a scalar loss with respect to an [`EmbeddingBatch`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingGrad {
    pub audio_loc: Vec<f64>,
    pub audio_avc: Vec<f64>,
    pub visual_loc: Vec<f64>,
    pub visual_avc: Vec<f64>,
}

impl EmbeddingGrad {
    pub fn zeros(dims: BatchDims) -> Self {
        EmbeddingGrad {
            audio_loc: vec![0.0; dims.audio_len()],
            audio_avc: vec![0.0; dims.audio_len()],
            visual_loc: vec![0.0; dims.visual_len()],
            visual_avc: vec![0.0; dims.visual_len()],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [
            &self.audio_loc[..],
            &self.audio_avc[..],
            &self.visual_loc[..],
            &self.visual_avc[..],
        ]
        .concat()
    }
}
