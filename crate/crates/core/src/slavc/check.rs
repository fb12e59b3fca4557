use crate::error::Result;
use crate::numerics::{finite_difference_gradient, max_relative_error, RandomSource};

use super::{loss_and_grad, BatchDims, Branch, EmbeddingBatch, Hyper, LossKind};

/// Step used by the finite-difference checks.
pub const GRADCHECK_EPS: f64 = 1e-6;
/// Largest accepted relative error between analytic and numeric gradients.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

/// Batch with standard-normal entries.
pub fn random_batch(rng: &mut RandomSource, dims: BatchDims, branch: Branch) -> EmbeddingBatch {
    let a = dims.batch * dims.dim;
    let v = a * dims.cells();
    let mut draw = |n: usize| (0..n).map(|_| rng.normal()).collect::<Vec<_>>();
    EmbeddingBatch::new(dims, branch, draw(a), draw(a), draw(v), draw(v))
        .expect("dimensions are consistent by construction")
}

/// Small random extents: batch 2..=`max_batch`, sides 1..=`max_side`,
/// width 1..=`max_dim`.
pub fn random_dims(
    rng: &mut RandomSource,
    max_batch: usize,
    max_side: usize,
    max_dim: usize,
) -> BatchDims {
    BatchDims {
        batch: 2 + rng.index(max_batch.max(2) - 1),
        height: 1 + rng.index(max_side),
        width: 1 + rng.index(max_side),
        dim: 1 + rng.index(max_dim),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub dims: BatchDims,
    pub loss: f64,
    pub max_relative_error: f64,
}

/// Compares the analytic gradient of `kind` with respect to the online
/// embeddings against central differences. `scale` multiplies the analytic
/// gradient and is 1 except in negative controls.
pub fn check_loss_gradient(
    kind: LossKind,
    online: &EmbeddingBatch,
    momentum: &EmbeddingBatch,
    hyper: &Hyper,
    scale: f64,
) -> Result<GradientCheck> {
    let dims = online.dims();
    let (loss, grad) = loss_and_grad(kind, online, momentum, hyper)?;
    let analytic: Vec<f64> = grad.to_flat().into_iter().map(|g| g * scale).collect();
    let numeric = finite_difference_gradient(
        |x| {
            EmbeddingBatch::from_flat(dims, online.branch, x)
                .and_then(|b| loss_and_grad(kind, &b, momentum, hyper))
                .map_or(f64::NAN, |(v, _)| v)
        },
        &online.to_flat(),
        GRADCHECK_EPS,
    )?;
    Ok(GradientCheck {
        dims,
        loss,
        max_relative_error: max_relative_error(&analytic, &numeric),
    })
}

/// One randomized check: draws extents within the limits, then online and
/// momentum batches.
pub fn random_gradient_check(
    kind: LossKind,
    hyper: &Hyper,
    rng: &mut RandomSource,
    scale: f64,
) -> Result<GradientCheck> {
    let dims = random_dims(rng, 3, 3, 4);
    let online = random_batch(rng, dims, Branch::Online);
    let momentum = random_batch(rng, dims, Branch::Momentum);
    check_loss_gradient(kind, &online, &momentum, hyper, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass_and_corruption_is_caught() {
        let mut rng = RandomSource::new(11);
        let h = Hyper::default();
        for kind in [LossKind::Micl, LossKind::Slavc, LossKind::Full] {
            let c = random_gradient_check(kind, &h, &mut rng, 1.0).unwrap();
            assert!(c.max_relative_error <= GRADCHECK_TOLERANCE, "{kind}: {c:?}");
        }
        let dims = BatchDims {
            batch: 3,
            height: 2,
            width: 2,
            dim: 3,
        };
        let online = random_batch(&mut rng, dims, Branch::Online);
        let momentum = random_batch(&mut rng, dims, Branch::Momentum);
        let c = check_loss_gradient(LossKind::Full, &online, &momentum, &h, 1.5).unwrap();
        assert!(c.max_relative_error > GRADCHECK_TOLERANCE);
    }
}
