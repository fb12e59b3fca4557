//! Bag similarity, the localization and correspondence probability maps, the
//! three training losses and the inference map.
//!
//! Losses are computed in closed form over a fixed graph (cosine, softmax /
//! log-sum-exp, max pooling) and come with hand-derived gradients with respect
//! to every embedding coordinate.

mod batch;
mod check;
mod inference;
mod loss;
mod similarity;

pub use batch::{Bag, BatchDims, Branch, EmbeddingBatch, EmbeddingGrad, Hyper, DEFAULT_TAU};
pub use check::{
    check_loss_gradient, random_batch, random_dims, random_gradient_check, GradientCheck,
    GRADCHECK_EPS, GRADCHECK_TOLERANCE,
};
pub use inference::{
    combine_with_object_prior, inference_map, inference_map_with, semi_supervised_loss,
    InferenceMode, LocalizationMap, DEFAULT_PRIOR_WEIGHT,
};
pub use loss::{
    full_loss, full_loss_and_grad, loss_and_grad, micl_loss, micl_loss_and_grad, slavc_loss,
    slavc_loss_and_grad, LossKind,
};
pub use similarity::{bag_similarity, combined_map, p_avc, p_loc};
