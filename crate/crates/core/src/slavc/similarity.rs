use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, softmax, Grid};

use super::{Bag, EmbeddingBatch, Hyper};

/// Max-pooled cosine similarity between an audio vector and a visual bag.
pub fn bag_similarity(audio: &[f64], bag: Bag<'_>) -> Result<f64> {
    if bag.cells() == 0 {
        return Err(Error::Structural("empty visual bag".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for c in 0..bag.cells() {
        best = best.max(cosine_similarity(audio, bag.cell(c))?.value);
    }
    Ok(best)
}

/// Localization term: softmax over the spatial cells of `cos / tau`.
pub fn p_loc(audio: &[f64], bag: Bag<'_>, hyper: &Hyper) -> Result<Grid> {
    hyper.validate()?;
    let cos = (0..bag.cells())
        .map(|c| cosine_similarity(audio, bag.cell(c)).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let logits = Grid::new(vec![bag.height, bag.width], cos)?;
    softmax(&logits, &[0, 1], hyper.tau)
}

/// Correspondence term for one visual cell: softmax over the batch audios.
pub fn p_avc(audios: &[f64], dim: usize, cell: &[f64], hyper: &Hyper) -> Result<Grid> {
    hyper.validate()?;
    if dim == 0 || audios.is_empty() || !audios.len().is_multiple_of(dim) {
        return Err(Error::Structural(format!(
            "{} audio values do not split into vectors of {dim}",
            audios.len()
        )));
    }
    let cos = audios
        .chunks(dim)
        .map(|a| cosine_similarity(a, cell).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let logits = Grid::new(vec![cos.len()], cos)?;
    softmax(&logits, &[0], hyper.tau)
}

/// Joint prediction map `P(a_i, v_j^xy) = P_loc * P_avc`.
pub fn combined_map(batch: &EmbeddingBatch, i: usize, j: usize, hyper: &Hyper) -> Result<Grid> {
    let dims = batch.dims();
    if i >= dims.batch || j >= dims.batch {
        return Err(Error::Structural(format!(
            "sample index ({i}, {j}) outside batch of {}",
            dims.batch
        )));
    }
    let loc = p_loc(batch.audio_loc(i), batch.bag_loc(j), hyper)?;
    let bag = batch.bag_avc(j);
    let mut values = loc.into_data();
    for (c, v) in values.iter_mut().enumerate() {
        let avc = p_avc(&batch.audio_avc, dims.dim, bag.cell(c), hyper)?;
        *v *= avc.data()[i];
    }
    Grid::new(vec![dims.height, dims.width], values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slavc::{BatchDims, Branch};
    use approx::assert_abs_diff_eq;

    #[test]
    fn bag_similarity_examples() {
        let audio = [1.0, 0.0];
        let bag = [0.0, 1.0, 1.0, 0.0];
        assert_abs_diff_eq!(
            bag_similarity(&audio, Bag::new(&bag, 1, 2, 2).unwrap()).unwrap(),
            1.0
        );
        let orth = [0.0, 1.0, 0.0, -2.0];
        assert_eq!(
            bag_similarity(&audio, Bag::new(&orth, 2, 1, 2).unwrap()).unwrap(),
            0.0
        );
        // unit cells whose first coordinate is the cosine with audio (1, 0)
        let cosines = [0.1, -0.3, 0.7, 0.2];
        let cells: Vec<f64> = cosines
            .iter()
            .flat_map(|&c: &f64| [c, (1.0 - c * c).sqrt()])
            .collect();
        let s = bag_similarity(&audio, Bag::new(&cells, 2, 2, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(s, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn empty_bag_is_structural_error() {
        assert!(Bag::new(&[], 0, 0, 2).is_err());
    }

    #[test]
    fn p_loc_examples() {
        let h = Hyper { tau: 0.5 };
        let bag = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let p = p_loc(&[1.0, 2.0], Bag::new(&bag, 1, 3, 2).unwrap(), &h).unwrap();
        assert!(p.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));

        let p = p_loc(&[1.0, 2.0], Bag::new(&[3.0, -1.0], 1, 1, 2).unwrap(), &h).unwrap();
        assert_eq!(p.data(), &[1.0]);

        // cosines (0, tau ln 3)
        let c = h.tau * 3f64.ln();
        let bag = [0.0, 1.0, c, (1.0 - c * c).sqrt()];
        let p = p_loc(&[1.0, 0.0], Bag::new(&bag, 1, 2, 2).unwrap(), &h).unwrap();
        assert_abs_diff_eq!(p.data()[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.data()[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn p_avc_examples() {
        let h = Hyper { tau: 0.2 };
        let p = p_avc(&[0.3, 0.4], 2, &[1.0, 1.0], &h).unwrap();
        assert_eq!(p.data(), &[1.0]);

        let p = p_avc(&[1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 2, &[0.5, -1.0], &h).unwrap();
        assert!(p.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));

        let c = h.tau * 3f64.ln();
        let audios = [0.0, 1.0, c, (1.0 - c * c).sqrt()];
        let p = p_avc(&audios, 2, &[1.0, 0.0], &h).unwrap();
        assert_abs_diff_eq!(p.data()[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.data()[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn combined_map_trivial_cases() {
        let h = Hyper::default();
        let dims = BatchDims {
            batch: 1,
            height: 1,
            width: 1,
            dim: 2,
        };
        let b = EmbeddingBatch::single_head(dims, vec![1.0, 0.5], vec![0.2, 0.9]).unwrap();
        assert_eq!(combined_map(&b, 0, 0, &h).unwrap().data(), &[1.0]);

        let dims = BatchDims {
            batch: 3,
            height: 2,
            width: 2,
            dim: 2,
        };
        let b = EmbeddingBatch::new(
            dims,
            Branch::Online,
            vec![1.0; 6],
            vec![1.0; 6],
            vec![0.5; 24],
            vec![0.5; 24],
        )
        .unwrap();
        let m = combined_map(&b, 1, 2, &h).unwrap();
        assert!(m.data().iter().all(|&v| (v - 1.0 / 12.0).abs() < 1e-12));
    }
}
