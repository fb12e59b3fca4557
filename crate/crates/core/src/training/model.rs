use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    dropout_mask, finite_difference_gradient, max_relative_error, Grid, RandomSource,
};
use crate::slavc::{
    loss_and_grad, BatchDims, Branch, EmbeddingBatch, EmbeddingGrad, Hyper, InferenceMode,
    LossKind, GRADCHECK_EPS,
};

use super::{RawBatch, TrainConfig};

/// Names of the four projection heads, in storage order.
pub const HEADS: [&str; 4] = ["audio-loc", "audio-avc", "visual-loc", "visual-avc"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// First and second moment estimates for every parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: Vec<Grid>,
    pub second: Vec<Grid>,
    pub step: u64,
}

impl AdamState {
    pub fn zeros_like(params: &[Grid]) -> Self {
        AdamState {
            first: params.iter().map(|p| Grid::zeros(p.shape())).collect(),
            second: params.iter().map(|p| Grid::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place. `names` labels the
    /// grids in error messages.
    pub fn update(
        &mut self,
        params: &mut [Grid],
        grads: &[Grid],
        names: &[&str],
        config: &TrainConfig,
    ) -> Result<()> {
        if params.len() != grads.len()
            || params.len() != self.first.len()
            || params
                .iter()
                .zip(grads)
                .any(|(p, g)| p.shape() != g.shape())
        {
            return Err(Error::Structural(
                "gradients do not match the parameter shapes".into(),
            ));
        }
        for (k, g) in grads.iter().enumerate() {
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::OptimizerFault {
                    parameter: names.get(k).copied().unwrap_or("unnamed").to_string(),
                });
            }
        }
        self.step += 1;
        let (b1, b2) = config.betas;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let wd = config.weight_decay;
        for k in 0..params.len() {
            let p = params[k].data_mut();
            let g = grads[k].data();
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for e in 0..p.len() {
                let grad = if config.decoupled_weight_decay {
                    g[e]
                } else {
                    g[e] + wd * p[e]
                };
                m[e] = b1 * m[e] + (1.0 - b1) * grad;
                v[e] = b2 * v[e] + (1.0 - b2) * grad * grad;
                let step = (m[e] / c1) / ((v[e] / c2).sqrt() + config.adam_eps);
                if config.decoupled_weight_decay {
                    p[e] -= config.lr * wd * p[e];
                }
                p[e] -= config.lr * step;
            }
        }
        Ok(())
    }
}

/// Online and momentum projection heads plus optimizer state.
///
/// Each head is a `embed_dim x raw_dim` matrix without bias.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderPairState {
    pub online: Vec<Grid>,
    pub momentum: Vec<Grid>,
    pub adam: AdamState,
    pub epoch: usize,
    /// Heads used to build localization maps.
    pub inference: InferenceMode,
}

/// Dropout masks for one batch: visual `B x cells x raw`, audio `B x raw`.
#[derive(Clone, Debug, PartialEq)]
pub struct Masks {
    pub audio: Grid,
    pub visual: Grid,
}

impl EncoderPairState {
    /// Uniform init in `[-1/sqrt(raw_dim), 1/sqrt(raw_dim)]`; the momentum
    /// heads start as copies of the online heads.
    pub fn init(raw_dim: usize, embed_dim: usize, rng: &mut RandomSource) -> Result<Self> {
        if raw_dim == 0 || embed_dim == 0 {
            return Err(Error::InvalidHyperparameter(
                "projection extents must be nonzero".into(),
            ));
        }
        let bound = 1.0 / (raw_dim as f64).sqrt();
        let online: Vec<Grid> = (0..HEADS.len())
            .map(|_| Grid::from_fn(&[embed_dim, raw_dim], |_| rng.uniform_range(-bound, bound)))
            .collect::<Result<_>>()?;
        Ok(EncoderPairState {
            adam: AdamState::zeros_like(&online),
            momentum: online.clone(),
            online,
            epoch: 0,
            inference: InferenceMode::Both,
        })
    }

    pub fn raw_dim(&self) -> usize {
        self.online[0].shape()[1]
    }

    pub fn embed_dim(&self) -> usize {
        self.online[0].shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.online[0].shape();
        let ok = self.online.len() == HEADS.len()
            && self.momentum.len() == HEADS.len()
            && self
                .online
                .iter()
                .chain(&self.momentum)
                .all(|g| g.shape() == shape)
            && self.adam.first.len() == HEADS.len()
            && self.adam.second.len() == HEADS.len()
            && self
                .adam
                .first
                .iter()
                .chain(&self.adam.second)
                .all(|g| g.shape() == shape);
        if ok {
            Ok(())
        } else {
            Err(Error::Structural(
                "inconsistent encoder state shapes".into(),
            ))
        }
    }

    /// Draws dropout masks for `batch` under `config`'s rates.
    pub fn draw_masks(
        &self,
        batch: &RawBatch,
        config: &TrainConfig,
        rng: &mut RandomSource,
    ) -> Result<Masks> {
        let b = batch.len();
        Ok(Masks {
            visual: dropout_mask(&[b, batch.cells(), batch.raw_dim], config.vdrop, rng)?,
            audio: dropout_mask(&[b, batch.raw_dim], config.adrop, rng)?,
        })
    }

    /// Online and momentum embeddings. Train mode drops encoder outputs with
    /// freshly drawn masks on the online branch only.
    pub fn forward(
        &self,
        batch: &RawBatch,
        mode: Mode,
        config: &TrainConfig,
        rng: &mut RandomSource,
    ) -> Result<(EmbeddingBatch, EmbeddingBatch)> {
        let masks = match mode {
            Mode::Train => Some(self.draw_masks(batch, config, rng)?),
            Mode::Eval => None,
        };
        self.forward_with_masks(batch, masks.as_ref())
    }

    pub fn forward_with_masks(
        &self,
        batch: &RawBatch,
        masks: Option<&Masks>,
    ) -> Result<(EmbeddingBatch, EmbeddingBatch)> {
        let (audio, visual) = inputs(batch, masks, self.raw_dim())?;
        let online = project_all(&self.online, &audio, &visual, batch, Branch::Online)?;
        let (audio, visual) = inputs(batch, None, self.raw_dim())?;
        let momentum = project_all(&self.momentum, &audio, &visual, batch, Branch::Momentum)?;
        Ok((online, momentum))
    }

    /// Gradient of the loss with respect to the online heads, given the
    /// gradient with respect to the online embeddings.
    pub fn backward(
        &self,
        batch: &RawBatch,
        masks: Option<&Masks>,
        grad: &EmbeddingGrad,
    ) -> Result<Vec<Grid>> {
        let (audio, visual) = inputs(batch, masks, self.raw_dim())?;
        let (d, r) = (self.embed_dim(), self.raw_dim());
        Ok(vec![
            outer_sum(&grad.audio_loc, &audio, d, r)?,
            outer_sum(&grad.audio_avc, &audio, d, r)?,
            outer_sum(&grad.visual_loc, &visual, d, r)?,
            outer_sum(&grad.visual_avc, &visual, d, r)?,
        ])
    }
}

/// Raw audio rows and visual rows, with masks applied.
fn inputs(batch: &RawBatch, masks: Option<&Masks>, raw_dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if batch.raw_dim != raw_dim {
        return Err(Error::Structural(format!(
            "raw width {} does not match projection input width {raw_dim}",
            batch.raw_dim
        )));
    }
    let cells = batch.cells();
    let mut audio = Vec::with_capacity(batch.len() * raw_dim);
    let mut visual = Vec::with_capacity(batch.len() * cells * raw_dim);
    for s in &batch.samples {
        if s.audio.len() != raw_dim || s.visual.len() != cells * raw_dim {
            return Err(Error::Structural("raw sample has the wrong length".into()));
        }
        audio.extend_from_slice(&s.audio);
        visual.extend_from_slice(&s.visual);
    }
    if let Some(m) = masks {
        if m.audio.len() != audio.len() || m.visual.len() != visual.len() {
            return Err(Error::Structural(
                "dropout masks do not match the batch".into(),
            ));
        }
        audio
            .iter_mut()
            .zip(m.audio.data())
            .for_each(|(x, k)| *x *= k);
        visual
            .iter_mut()
            .zip(m.visual.data())
            .for_each(|(x, k)| *x *= k);
    }
    Ok((audio, visual))
}

/// `rows x raw` times the transpose of `weights` (`dim x raw`).
fn project(weights: &Grid, rows: &[f64]) -> Vec<f64> {
    let (d, r) = (weights.shape()[0], weights.shape()[1]);
    let w = weights.data();
    let mut out = Vec::with_capacity(rows.len() / r * d);
    for x in rows.chunks(r) {
        for k in 0..d {
            let wk = &w[k * r..(k + 1) * r];
            out.push(wk.iter().zip(x).map(|(a, b)| a * b).sum());
        }
    }
    out
}

fn project_all(
    heads: &[Grid],
    audio: &[f64],
    visual: &[f64],
    batch: &RawBatch,
    branch: Branch,
) -> Result<EmbeddingBatch> {
    let dims = BatchDims {
        batch: batch.len(),
        height: batch.height,
        width: batch.width,
        dim: heads[0].shape()[0],
    };
    EmbeddingBatch::new(
        dims,
        branch,
        project(&heads[0], audio),
        project(&heads[1], audio),
        project(&heads[2], visual),
        project(&heads[3], visual),
    )
}

/// `sum_n g_n (x) x_n` as a `d x r` grid.
fn outer_sum(g: &[f64], x: &[f64], d: usize, r: usize) -> Result<Grid> {
    let mut out = vec![0.0; d * r];
    for (gn, xn) in g.chunks(d).zip(x.chunks(r)) {
        for (k, &gk) in gn.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            let row = &mut out[k * r..(k + 1) * r];
            row.iter_mut().zip(xn).for_each(|(o, &v)| *o += gk * v);
        }
    }
    Grid::new(vec![d, r], out)
}

/// Max relative error between the analytic gradient of `kind` with respect
/// to every online head weight and central differences, for a frozen batch
/// and frozen masks.
pub fn projection_gradient_check(
    state: &EncoderPairState,
    batch: &RawBatch,
    masks: Option<&Masks>,
    kind: LossKind,
    hyper: &Hyper,
) -> Result<f64> {
    let (online, momentum) = state.forward_with_masks(batch, masks)?;
    let (_, grad) = loss_and_grad(kind, &online, &momentum, hyper)?;
    let analytic: Vec<f64> = state
        .backward(batch, masks, &grad)?
        .into_iter()
        .flat_map(Grid::into_data)
        .collect();
    let point: Vec<f64> = state
        .online
        .iter()
        .flat_map(|g| g.data().to_vec())
        .collect();
    let mut probe = state.clone();
    let numeric = finite_difference_gradient(
        |x| {
            let mut at = 0;
            for g in probe.online.iter_mut() {
                let n = g.len();
                g.data_mut().copy_from_slice(&x[at..at + n]);
                at += n;
            }
            probe
                .forward_with_masks(batch, masks)
                .and_then(|(o, m)| loss_and_grad(kind, &o, &m, hyper))
                .map_or(f64::NAN, |(v, _)| v)
        },
        &point,
        GRADCHECK_EPS,
    )?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Adam step on the online heads of `state`.
pub fn adam_step(state: &mut EncoderPairState, grads: &[Grid], config: &TrainConfig) -> Result<()> {
    state.adam.update(&mut state.online, grads, &HEADS, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{make_synthetic_batch, SyntheticSpec};

    fn setup() -> (EncoderPairState, RawBatch) {
        let spec = SyntheticSpec {
            noise: 0.2,
            ..SyntheticSpec::default()
        };
        let mut rng = RandomSource::new(5);
        let batch = make_synthetic_batch(&spec, 4, 0.0, &mut rng).unwrap();
        (
            EncoderPairState::init(spec.raw_dim, 6, &mut rng).unwrap(),
            batch,
        )
    }

    #[test]
    fn eval_forward_is_deterministic_and_rate_zero_matches_eval() {
        let (state, batch) = setup();
        let cfg = TrainConfig {
            vdrop: 0.0,
            adrop: 0.0,
            ..TrainConfig::synthetic()
        };
        let mut rng = RandomSource::new(0);
        let a = state.forward(&batch, Mode::Eval, &cfg, &mut rng).unwrap();
        let b = state.forward(&batch, Mode::Eval, &cfg, &mut rng).unwrap();
        let c = state.forward(&batch, Mode::Train, &cfg, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn momentum_branch_ignores_dropout() {
        let (state, batch) = setup();
        let cfg = TrainConfig::synthetic();
        let mut rng = RandomSource::new(0);
        let (_, m_train) = state.forward(&batch, Mode::Train, &cfg, &mut rng).unwrap();
        let (_, m_eval) = state.forward(&batch, Mode::Eval, &cfg, &mut rng).unwrap();
        assert_eq!(m_train, m_eval);
    }

    #[test]
    fn adam_zero_gradient_no_decay_is_identity() {
        let (mut state, _) = setup();
        let before = state.online.clone();
        let grads: Vec<Grid> = before.iter().map(|g| Grid::zeros(g.shape())).collect();
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::synthetic()
        };
        adam_step(&mut state, &grads, &cfg).unwrap();
        assert_eq!(state.online, before);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut x = vec![Grid::filled(&[1], 1.0)];
        let g = vec![Grid::filled(&[1], 1.0)];
        let mut adam = AdamState::zeros_like(&x);
        let cfg = TrainConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        adam.update(&mut x, &g, &["x"], &cfg).unwrap();
        assert!((x[0].data()[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let (mut state, batch) = setup();
        let mut rng = RandomSource::new(8);
        // Momentum heads distinct from the online heads.
        state.momentum = EncoderPairState::init(state.raw_dim(), state.embed_dim(), &mut rng)
            .unwrap()
            .online;
        let cfg = TrainConfig::synthetic();
        let masks = state.draw_masks(&batch, &cfg, &mut rng).unwrap();
        for kind in [LossKind::Micl, LossKind::Slavc, LossKind::Full] {
            let err = projection_gradient_check(&state, &batch, Some(&masks), kind, &cfg.hyper())
                .unwrap();
            assert!(err <= 1e-3, "{kind}: {err}");
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let (mut state, _) = setup();
        let mut grads: Vec<Grid> = state
            .online
            .iter()
            .map(|g| Grid::zeros(g.shape()))
            .collect();
        grads[2].data_mut()[0] = f64::NAN;
        let err = adam_step(&mut state, &grads, &TrainConfig::synthetic()).unwrap_err();
        assert!(matches!(err, Error::OptimizerFault { parameter } if parameter == "visual-loc"));
    }
}
