//! Dense real-valued grids and the small numerical kernels everything else is
//! built on.

mod gradcheck;
mod grid;
mod ops;
mod rng;

pub use gradcheck::{finite_difference_gradient, max_relative_error, relative_error};
pub use grid::Grid;
pub use ops::{
    cosine_similarity, dropout_mask, ema_update, log_sum_exp, softmax, Similarity, DEGENERATE_NORM,
};
pub use rng::RandomSource;
