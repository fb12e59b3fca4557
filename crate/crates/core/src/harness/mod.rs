//! Benchmark plumbing: annotation ingestion, consensus rasterization,
//! automated negatives, the center-prior baseline, prediction-map files,
//! per-sample scoring and report emission.

mod annotations;
mod center_prior;
mod eval;
mod mapfile;
mod negatives;
mod report;
mod resample;

pub use annotations::{
    load_annotations, load_annotations_file, rasterize_consensus, write_annotations,
    AnnotationRecord, DatasetManifest, FRAME,
};
pub use center_prior::{center_prior_map, DEFAULT_RADIUS_FRACTION};
pub use eval::{
    build_report, f1_at, linspace, score_manifest, score_sample, sweep, EvalConfig, MapSource,
    ScoredSample, SweepAxis,
};
pub use mapfile::{
    decode_map, encode_map, map_path, read_map, write_map, MAP_EXTENSION, MAP_HEADER_LEN,
    MAP_MAGIC, MAP_VERSION,
};
pub use negatives::{generate_negatives, hard_count, DEFAULT_HARD_FRACTION};
pub use report::{
    emit_report, percent, GroupRow, MetricRow, ReportConfig, ReportDocument, ReportFormat,
    PERCENT_DECIMALS,
};
pub use resample::resample_bilinear;
