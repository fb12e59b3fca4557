//! Visual sound-source localization with simultaneous localization and
//! audio-visual correspondence, plus the extended localization benchmark
//! (negative samples, LocAcc, max-F1 and AP).
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] dense grids, stable softmax, dropout masks, EMA and the
//!   central-difference gradient oracle.
//! * [`slavc`] bag similarity, the localization / correspondence maps, the
//!   three contrastive losses with hand-derived gradients and the inference map.
//! * [`training`] a desk-scale toy model (linear projections) trained with Adam
//!   and momentum encoders on a synthetic planted-source task, plus the log
//!   spectrogram frontend.
//! * [`metrics`] cIoU, TP/FP/FN bookkeeping, LocAcc, max-F1 and
//!   non-interpolated AP.
//! * [`harness`] annotation ingestion, consensus rasterization, automated
//!   negatives, center-prior baseline, map files and reports.
//! * [`cli`] the `slavc` command line.

pub mod cli;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod slavc;
pub mod training;

pub use error::{Error, Result};
