//! The extended localization protocol: prediction sets, consensus IoU,
//! TP/FP/FN bookkeeping with negatives, LocAcc, max-F1, non-interpolated AP
//! and grouped breakdowns.

mod breakdown;
mod ground_truth;
mod prediction;
mod protocol;

pub use breakdown::{breakdown, summarize_group, GroupKey, GroupMetrics};
pub use ground_truth::{
    size_bucket, size_bucket_for_area, GroundTruth, NegativeType, PixelBox, SizeBucket,
};
pub use prediction::{iou, prediction_set, ThresholdMode};
pub use protocol::{
    average_precision, classify, loc_acc, max_f1, summarize, Decision, MaxF1, SampleOutcome,
    Summary, DEFAULT_GAMMA,
};
