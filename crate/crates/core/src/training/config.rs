use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slavc::{Hyper, LossKind, DEFAULT_TAU};

/// Optimizer and regularization settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Apply weight decay directly to the parameters instead of adding
    /// `weight_decay * theta` to the gradient.
    pub decoupled_weight_decay: bool,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub vdrop: f64,
    pub adrop: f64,
    pub momentum: f64,
    pub tau: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Output width of every projection head.
    pub embed_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            weight_decay: 1e-4,
            decoupled_weight_decay: false,
            betas: (0.9, 0.999),
            adam_eps: 1e-8,
            batch_size: 128,
            epochs: 20,
            vdrop: 0.9,
            adrop: 0.0,
            momentum: 0.999,
            tau: DEFAULT_TAU,
            seed: 0,
            loss: LossKind::Full,
            embed_dim: 512,
        }
    }
}

impl TrainConfig {
    /// Settings for the planted-source task. Regularization and temperature
    /// keep their defaults; the step size and batch are scaled to the
    /// much smaller problem.
    pub fn synthetic() -> Self {
        TrainConfig {
            lr: 1e-2,
            batch_size: 16,
            embed_dim: 32,
            ..TrainConfig::default()
        }
    }

    pub fn hyper(&self) -> Hyper {
        Hyper { tau: self.tau }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparameter(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!(
                "adam epsilon must be positive, got {}",
                self.adam_eps
            ));
        }
        for (name, rate) in [
            ("visual dropout", self.vdrop),
            ("audio dropout", self.adrop),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return bad(format!("{name} rate must lie in [0, 1), got {rate}"));
            }
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1], got {}",
                self.momentum
            ));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.embed_dim == 0 {
            return bad("embedding width must be at least 1".into());
        }
        self.hyper().validate()
    }
}

/// Shape of the planted-source task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub raw_dim: usize,
    /// Standard deviation of the isotropic noise, relative to the unit-norm
    /// signatures.
    pub noise: f64,
    /// Cells (besides the planted one) that carry another class's signature.
    pub distractors: usize,
    pub train_size: usize,
    pub heldout_size: usize,
    /// Fraction of heldout samples whose audio comes from another class.
    pub negative_fraction: f64,
    /// Seed of the class signatures; fixed so that every split shares them.
    pub signature_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 8,
            height: 4,
            width: 4,
            raw_dim: 128,
            noise: 0.0,
            distractors: 0,
            train_size: 2000,
            heldout_size: 500,
            negative_fraction: 0.5,
            signature_seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparameter(msg));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.height == 0 || self.width == 0 || self.raw_dim == 0 {
            return bad("grid extents and raw width must be nonzero".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if self.distractors >= self.cells() {
            return bad(format!(
                "{} distractors do not fit next to the planted cell in {} cells",
                self.distractors,
                self.cells()
            ));
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return bad(format!(
                "negative fraction must lie in [0, 1], got {}",
                self.negative_fraction
            ));
        }
        Ok(())
    }
}
