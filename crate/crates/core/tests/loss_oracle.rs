//! Loss values against a direct, unoptimized transcription of the
//! definitions: plain exp/ln, no log-sum-exp, no shared tables.

use proptest::prelude::*;
use slavc::numerics::RandomSource;
use slavc::slavc::{
    full_loss, micl_loss, random_batch, slavc_loss, BatchDims, Branch, EmbeddingBatch, Hyper,
};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cross-entropy of the diagonal along rows and/or columns, averaged over
/// the batch.
fn diagonal_ce(s: &[Vec<f64>], rows: bool, cols: bool) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        if rows {
            let z: f64 = (0..n).map(|j| s[i][j].exp()).sum();
            total -= (s[i][i].exp() / z).ln();
        }
        if cols {
            let z: f64 = (0..n).map(|k| s[k][i].exp()).sum();
            total -= (s[i][i].exp() / z).ln();
        }
    }
    total / n as f64
}

fn micl_scores(b: &EmbeddingBatch, tau: f64) -> Vec<Vec<f64>> {
    let n = b.batch();
    let cells = b.dims().cells();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let bag = b.bag_loc(j);
                    (0..cells)
                        .map(|c| cosine(b.audio_loc(i), bag.cell(c)) / tau)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect()
}

/// `s[i][j] = max_c ln(P_loc(c | i, j) * P_avc(i | j, c))` with audio from
/// `a` and bags from `v`.
fn joint_scores(a: &EmbeddingBatch, v: &EmbeddingBatch, tau: f64) -> Vec<Vec<f64>> {
    let n = a.batch();
    let cells = a.dims().cells();
    let loc = |i: usize, j: usize, c: usize| cosine(a.audio_loc(i), v.bag_loc(j).cell(c)) / tau;
    let avc = |i: usize, j: usize, c: usize| cosine(a.audio_avc(i), v.bag_avc(j).cell(c)) / tau;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..cells)
                        .map(|c| {
                            let p_loc = loc(i, j, c).exp()
                                / (0..cells).map(|d| loc(i, j, d).exp()).sum::<f64>();
                            let p_avc = avc(i, j, c).exp()
                                / (0..n).map(|k| avc(k, j, c).exp()).sum::<f64>();
                            (p_loc * p_avc).ln()
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn batches(
    seed: u64,
    batch: usize,
    height: usize,
    width: usize,
    dim: usize,
) -> (EmbeddingBatch, EmbeddingBatch) {
    let dims = BatchDims {
        batch,
        height,
        width,
        dim,
    };
    let mut rng = RandomSource::new(seed);
    (
        random_batch(&mut rng, dims, Branch::Online),
        random_batch(&mut rng, dims, Branch::Momentum),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_match_direct_definitions(
        seed in any::<u64>(),
        batch in 1usize..=5,
        height in 1usize..=3,
        width in 1usize..=3,
        dim in 1usize..=6,
        tau in prop::sample::select(vec![0.03, 0.07, 0.2, 1.0]),
    ) {
        let (online, momentum) = batches(seed, batch, height, width, dim);
        let hyper = Hyper::new(tau).unwrap();

        let micl = diagonal_ce(&micl_scores(&online, tau), true, true);
        prop_assert!(close(micl_loss(&online, &hyper).unwrap(), micl));

        let joint = joint_scores(&online, &online, tau);
        prop_assert!(close(slavc_loss(&online, &hyper).unwrap(), diagonal_ce(&joint, true, true)));

        let audio_side = diagonal_ce(&joint_scores(&online, &momentum, tau), true, false);
        let visual_side = diagonal_ce(&joint_scores(&momentum, &online, tau), false, true);
        let full = full_loss(&online, &momentum, &hyper).unwrap();
        prop_assert!(close(full, audio_side + visual_side));
    }

    #[test]
    fn losses_are_nonnegative_and_finite(seed in any::<u64>(), batch in 1usize..=4) {
        let (online, momentum) = batches(seed, batch, 2, 2, 3);
        let hyper = Hyper::default();
        for v in [
            micl_loss(&online, &hyper).unwrap(),
            slavc_loss(&online, &hyper).unwrap(),
            full_loss(&online, &momentum, &hyper).unwrap(),
        ] {
            prop_assert!(v.is_finite() && v >= -1e-12);
        }
    }
}

#[test]
fn shape_mismatch_is_structural() {
    let (online, _) = batches(1, 3, 2, 2, 3);
    let (_, momentum) = batches(1, 2, 2, 2, 3);
    let err = full_loss(&online, &momentum, &Hyper::default()).unwrap_err();
    assert!(matches!(err, slavc::Error::Structural(_)));
}
