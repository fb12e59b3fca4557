use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, DEGENERATE_NORM};

use super::{BatchDims, EmbeddingBatch, EmbeddingGrad, Hyper};

/// Which training objective to optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Multiple-instance contrastive loss on max-pooled cosine similarity.
    Micl,
    /// Contrastive loss on the max-pooled joint localization/correspondence map.
    Slavc,
    /// As `Slavc`, with momentum features as targets on both sides.
    Full,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micl" => Ok(LossKind::Micl),
            "slavc" => Ok(LossKind::Slavc),
            "full" => Ok(LossKind::Full),
            other => Err(Error::InvalidHyperparameter(format!(
                "unknown loss `{other}` (expected micl, slavc or full)"
            ))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Micl => "micl",
            LossKind::Slavc => "slavc",
            LossKind::Full => "full",
        })
    }
}

/// Cosine similarities between every audio and every cell of every bag, with
/// the normalized vectors kept for the backward pass.
struct CosineTable {
    n: usize,
    cells: usize,
    dim: usize,
    audio_unit: Vec<f64>,
    audio_norm: Vec<f64>,
    visual_unit: Vec<f64>,
    visual_norm: Vec<f64>,
    /// `[i][j][c]`: audio `i` against cell `c` of bag `j`
    cos: Vec<f64>,
}

fn normalize_rows(data: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut unit = data.to_vec();
    let norms = unit
        .chunks_mut(dim)
        .map(|row| {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < DEGENERATE_NORM {
                row.iter_mut().for_each(|x| *x = 0.0);
            } else {
                row.iter_mut().for_each(|x| *x /= n);
            }
            n
        })
        .collect();
    (unit, norms)
}

impl CosineTable {
    fn new(audio: &[f64], visual: &[f64], dims: BatchDims) -> Self {
        let (n, cells, dim) = (dims.batch, dims.cells(), dims.dim);
        let (audio_unit, audio_norm) = normalize_rows(audio, dim);
        let (visual_unit, visual_norm) = normalize_rows(visual, dim);
        let mut cos = vec![0.0; n * n * cells];
        for i in 0..n {
            let a = &audio_unit[i * dim..(i + 1) * dim];
            for jc in 0..n * cells {
                let v = &visual_unit[jc * dim..(jc + 1) * dim];
                let dot: f64 = a.iter().zip(v).map(|(x, y)| x * y).sum();
                cos[i * n * cells + jc] = dot.clamp(-1.0, 1.0);
            }
        }
        CosineTable {
            n,
            cells,
            dim,
            audio_unit,
            audio_norm,
            visual_unit,
            visual_norm,
            cos,
        }
    }

    fn at(&self, i: usize, j: usize, c: usize) -> f64 {
        self.cos[(i * self.n + j) * self.cells + c]
    }

    /// Accumulates `d cos / d input` weighted by `dcos` into the audio and
    /// visual gradients. Dead (zero-norm) vectors receive no gradient.
    fn backward(&self, dcos: &[f64], grad_audio: &mut [f64], grad_visual: &mut [f64]) {
        let (n, cells, dim) = (self.n, self.cells, self.dim);
        for i in 0..n {
            let na = self.audio_norm[i];
            if na < DEGENERATE_NORM {
                continue;
            }
            let a = &self.audio_unit[i * dim..(i + 1) * dim];
            for jc in 0..n * cells {
                let g = dcos[i * n * cells + jc];
                if g == 0.0 {
                    continue;
                }
                let nv = self.visual_norm[jc];
                if nv < DEGENERATE_NORM {
                    continue;
                }
                let v = &self.visual_unit[jc * dim..(jc + 1) * dim];
                let c = self.cos[i * n * cells + jc];
                let ga = &mut grad_audio[i * dim..(i + 1) * dim];
                for k in 0..dim {
                    ga[k] += g * (v[k] - c * a[k]) / na;
                }
                let gv = &mut grad_visual[jc * dim..(jc + 1) * dim];
                for k in 0..dim {
                    gv[k] += g * (a[k] - c * v[k]) / nv;
                }
            }
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    crate::numerics::Grid::new(vec![values.len()], values.to_vec())
        .map(|g| g.argmax())
        .unwrap_or(0)
}

/// Symmetric InfoNCE over a `B x B` logit matrix whose diagonal holds the
/// positive pairs. `rows` adds `-log softmax_j(l_ij)[i]`, `cols` adds
/// `-log softmax_k(l_ki)[i]`; both averaged over `i`.
fn contrastive(logits: &[f64], n: usize, rows: bool, cols: bool) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; n * n];
    let scale = 1.0 / n as f64;
    if rows {
        for i in 0..n {
            let row = &logits[i * n..(i + 1) * n];
            let lse = log_sum_exp(row.iter().copied());
            value += lse - row[i];
            for j in 0..n {
                grad[i * n + j] += scale * ((row[j] - lse).exp() - f64::from(i == j));
            }
        }
    }
    if cols {
        for i in 0..n {
            let col = (0..n).map(|k| logits[k * n + i]);
            let lse = log_sum_exp(col);
            value += lse - logits[i * n + i];
            for k in 0..n {
                grad[k * n + i] += scale * ((logits[k * n + i] - lse).exp() - f64::from(k == i));
            }
        }
    }
    (value * scale, grad)
}

/// Max-pooled log joint map `m_ij = max_c [log P_loc + log P_avc]` for audio
/// set `A` against visual set `V`, plus everything needed to backpropagate.
struct JointScores {
    n: usize,
    cells: usize,
    tau: f64,
    loc: CosineTable,
    avc: CosineTable,
    p_loc: Vec<f64>,
    p_avc: Vec<f64>,
    pooled: Vec<f64>,
    arg: Vec<usize>,
}

impl JointScores {
    fn new(audio: &EmbeddingBatch, visual: &EmbeddingBatch, tau: f64) -> Self {
        let dims = audio.dims();
        let (n, cells) = (dims.batch, dims.cells());
        let loc = CosineTable::new(&audio.audio_loc, &visual.visual_loc, dims);
        let avc = CosineTable::new(&audio.audio_avc, &visual.visual_avc, dims);

        let mut log_loc = vec![0.0; n * n * cells];
        for i in 0..n {
            for j in 0..n {
                let base = (i * n + j) * cells;
                let lse = log_sum_exp((0..cells).map(|c| loc.at(i, j, c) / tau));
                for c in 0..cells {
                    log_loc[base + c] = loc.at(i, j, c) / tau - lse;
                }
            }
        }
        let mut log_avc = vec![0.0; n * n * cells];
        for j in 0..n {
            for c in 0..cells {
                let lse = log_sum_exp((0..n).map(|i| avc.at(i, j, c) / tau));
                for i in 0..n {
                    log_avc[(i * n + j) * cells + c] = avc.at(i, j, c) / tau - lse;
                }
            }
        }

        let mut pooled = vec![0.0; n * n];
        let mut arg = vec![0; n * n];
        let joint: Vec<f64> = log_loc.iter().zip(&log_avc).map(|(a, b)| a + b).collect();
        for ij in 0..n * n {
            let cellwise = &joint[ij * cells..(ij + 1) * cells];
            let c = argmax(cellwise);
            arg[ij] = c;
            pooled[ij] = cellwise[c];
        }

        JointScores {
            n,
            cells,
            tau,
            loc,
            avc,
            p_loc: log_loc.into_iter().map(f64::exp).collect(),
            p_avc: log_avc.into_iter().map(f64::exp).collect(),
            pooled,
            arg,
        }
    }

    fn backward(&self, d_pooled: &[f64], dims: BatchDims) -> EmbeddingGrad {
        let (n, cells, tau) = (self.n, self.cells, self.tau);
        let mut d_loc = vec![0.0; n * n * cells];
        let mut d_avc = vec![0.0; n * n * cells];
        for i in 0..n {
            for j in 0..n {
                let g = d_pooled[i * n + j];
                if g == 0.0 {
                    continue;
                }
                let star = self.arg[i * n + j];
                let base = (i * n + j) * cells;
                for c in 0..cells {
                    let hit = f64::from(c == star);
                    d_loc[base + c] += g * (hit - self.p_loc[base + c]) / tau;
                }
                for k in 0..n {
                    let at = (k * n + j) * cells + star;
                    let hit = f64::from(k == i);
                    d_avc[at] += g * (hit - self.p_avc[at]) / tau;
                }
            }
        }
        let mut grad = EmbeddingGrad::zeros(dims);
        self.loc
            .backward(&d_loc, &mut grad.audio_loc, &mut grad.visual_loc);
        self.avc
            .backward(&d_avc, &mut grad.audio_avc, &mut grad.visual_avc);
        grad
    }
}

/// Multiple-instance contrastive loss on the localization head.
pub fn micl_loss(batch: &EmbeddingBatch, hyper: &Hyper) -> Result<f64> {
    micl_loss_and_grad(batch, hyper).map(|(v, _)| v)
}

pub fn micl_loss_and_grad(batch: &EmbeddingBatch, hyper: &Hyper) -> Result<(f64, EmbeddingGrad)> {
    hyper.validate()?;
    let dims = batch.dims();
    let (n, cells) = (dims.batch, dims.cells());
    let table = CosineTable::new(&batch.audio_loc, &batch.visual_loc, dims);
    let mut logits = vec![0.0; n * n];
    let mut arg = vec![0; n * n];
    for ij in 0..n * n {
        let cellwise = &table.cos[ij * cells..(ij + 1) * cells];
        let c = argmax(cellwise);
        arg[ij] = c;
        logits[ij] = cellwise[c] / hyper.tau;
    }
    let (value, d_logits) = contrastive(&logits, n, true, true);
    let mut d_cos = vec![0.0; n * n * cells];
    for ij in 0..n * n {
        d_cos[ij * cells + arg[ij]] = d_logits[ij] / hyper.tau;
    }
    let mut grad = EmbeddingGrad::zeros(dims);
    table.backward(&d_cos, &mut grad.audio_loc, &mut grad.visual_loc);
    Ok((value, grad))
}

/// Contrastive loss over the max-pooled joint map of a single branch.
pub fn slavc_loss(batch: &EmbeddingBatch, hyper: &Hyper) -> Result<f64> {
    slavc_loss_and_grad(batch, hyper).map(|(v, _)| v)
}

pub fn slavc_loss_and_grad(batch: &EmbeddingBatch, hyper: &Hyper) -> Result<(f64, EmbeddingGrad)> {
    hyper.validate()?;
    let scores = JointScores::new(batch, batch, hyper.tau);
    let (value, d_pooled) = contrastive(&scores.pooled, batch.batch(), true, true);
    Ok((value, scores.backward(&d_pooled, batch.dims())))
}

/// Joint-map loss with momentum targets: online audio against momentum bags,
/// and momentum audio against online bags.
pub fn full_loss(online: &EmbeddingBatch, momentum: &EmbeddingBatch, hyper: &Hyper) -> Result<f64> {
    full_loss_and_grad(online, momentum, hyper).map(|(v, _)| v)
}

/// The returned gradient covers the online branch only; the momentum branch is
/// a constant target.
pub fn full_loss_and_grad(
    online: &EmbeddingBatch,
    momentum: &EmbeddingBatch,
    hyper: &Hyper,
) -> Result<(f64, EmbeddingGrad)> {
    hyper.validate()?;
    if !online.same_shape(momentum) {
        return Err(Error::Structural(format!(
            "online branch {:?} and momentum branch {:?} differ in shape",
            online.dims(),
            momentum.dims()
        )));
    }
    let n = online.batch();
    let dims = online.dims();

    let audio_side = JointScores::new(online, momentum, hyper.tau);
    let (v1, d1) = contrastive(&audio_side.pooled, n, true, false);
    let g1 = audio_side.backward(&d1, dims);

    let visual_side = JointScores::new(momentum, online, hyper.tau);
    let (v2, d2) = contrastive(&visual_side.pooled, n, false, true);
    let g2 = visual_side.backward(&d2, dims);

    let grad = EmbeddingGrad {
        audio_loc: g1.audio_loc,
        audio_avc: g1.audio_avc,
        visual_loc: g2.visual_loc,
        visual_avc: g2.visual_avc,
    };
    Ok((v1 + v2, grad))
}

/// Dispatches on `kind`; `momentum` is only read by [`LossKind::Full`].
pub fn loss_and_grad(
    kind: LossKind,
    online: &EmbeddingBatch,
    momentum: &EmbeddingBatch,
    hyper: &Hyper,
) -> Result<(f64, EmbeddingGrad)> {
    match kind {
        LossKind::Micl => micl_loss_and_grad(online, hyper),
        LossKind::Slavc => slavc_loss_and_grad(online, hyper),
        LossKind::Full => full_loss_and_grad(online, momentum, hyper),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, max_relative_error, RandomSource};
    use crate::slavc::Branch;

    fn random_batch(rng: &mut RandomSource, dims: BatchDims, branch: Branch) -> EmbeddingBatch {
        let a = dims.batch * dims.dim;
        let v = a * dims.cells();
        let mut draw = |n: usize| (0..n).map(|_| rng.normal()).collect::<Vec<_>>();
        EmbeddingBatch::new(dims, branch, draw(a), draw(a), draw(v), draw(v)).unwrap()
    }

    const DIMS: BatchDims = BatchDims {
        batch: 3,
        height: 2,
        width: 2,
        dim: 3,
    };

    #[test]
    fn single_sample_losses_vanish() {
        let mut rng = RandomSource::new(5);
        let dims = BatchDims { batch: 1, ..DIMS };
        let b = random_batch(&mut rng, dims, Branch::Online);
        let m = random_batch(&mut rng, dims, Branch::Momentum);
        let h = Hyper::default();
        assert_eq!(micl_loss(&b, &h).unwrap(), 0.0);
        assert_eq!(slavc_loss(&b, &h).unwrap(), 0.0);
        assert_eq!(full_loss(&b, &m, &h).unwrap(), 0.0);
    }

    #[test]
    fn equal_similarities_give_two_log_b() {
        let dims = BatchDims {
            batch: 2,
            height: 2,
            width: 1,
            dim: 2,
        };
        let b = EmbeddingBatch::single_head(
            dims,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.6, 0.8, 0.0, 1.0, 0.6, 0.8, 0.0, 1.0],
        )
        .unwrap();
        let v = micl_loss(&b, &Hyper::default()).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_temperature_and_shape() {
        let mut rng = RandomSource::new(1);
        let b = random_batch(&mut rng, DIMS, Branch::Online);
        assert!(micl_loss(&b, &Hyper { tau: 0.0 }).is_err());
        let other = random_batch(&mut rng, BatchDims { batch: 2, ..DIMS }, Branch::Momentum);
        assert!(matches!(
            full_loss(&b, &other, &Hyper::default()),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = RandomSource::new(2024);
        let h = Hyper { tau: 0.1 };
        for kind in [LossKind::Micl, LossKind::Slavc, LossKind::Full] {
            let online = random_batch(&mut rng, DIMS, Branch::Online);
            let momentum = random_batch(&mut rng, DIMS, Branch::Momentum);
            let (_, grad) = loss_and_grad(kind, &online, &momentum, &h).unwrap();
            let numeric = finite_difference_gradient(
                |x| {
                    let b = EmbeddingBatch::from_flat(DIMS, Branch::Online, x).unwrap();
                    loss_and_grad(kind, &b, &momentum, &h).unwrap().0
                },
                &online.to_flat(),
                1e-5,
            )
            .unwrap();
            let err = max_relative_error(&grad.to_flat(), &numeric);
            assert!(err < 1e-5, "{kind}: {err}");
        }
    }

    #[test]
    fn dead_vectors_get_zero_gradient() {
        let mut rng = RandomSource::new(8);
        let mut b = random_batch(&mut rng, DIMS, Branch::Online);
        b.audio_loc[..DIMS.dim].iter_mut().for_each(|x| *x = 0.0);
        let (v, g) = micl_loss_and_grad(&b, &Hyper::default()).unwrap();
        assert!(v.is_finite());
        assert!(g.audio_loc[..DIMS.dim].iter().all(|&x| x == 0.0));
    }
}
