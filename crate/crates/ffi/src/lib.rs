//! C ABI over the `slavc` library.
//!
//! Every fallible function returns a [`SlavcStatus`]; on failure a message
//! is available from [`slavc_last_error`] on the same thread. Maps are
//! opaque [`SlavcMap`] handles owned by the caller and released with
//! [`slavc_map_free`]. Embedding buffers use the flat layout
//! `audio_loc | audio_avc | visual_loc | visual_avc`, each row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use slavc::harness::{center_prior_map, rasterize_consensus, read_map, write_map};
use slavc::metrics::{
    average_precision, iou, loc_acc, max_f1, prediction_set, GroundTruth, NegativeType, PixelBox,
    SampleOutcome, ThresholdMode,
};
use slavc::slavc::{
    inference_map_with, loss_and_grad, Bag, BatchDims, Branch, EmbeddingBatch, Hyper,
    InferenceMode, LocalizationMap, LossKind,
};
use slavc::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlavcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Structural = 3,
    Format = 4,
    Io = 5,
    UndefinedMetric = 6,
    InternalFault = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlavcLoss {
    Micl = 0,
    Slavc = 1,
    Full = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlavcInference {
    Loc = 0,
    Avc = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlavcThresholdKind {
    /// Pixels scoring strictly above `value`.
    Absolute = 0,
    /// The `ceil(value * H * W)` best pixels.
    TopFraction = 1,
    /// Pixels above the midpoint of the map's range; `value` is ignored.
    HalfRange = 2,
}

/// Per-sample input to the metric functions. `iou` is ignored for
/// negatives. Confidence ties in AP are broken by position in the array.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SlavcOutcome {
    pub positive: bool,
    pub iou: f64,
    pub confidence: f64,
}

/// Opaque localization map.
pub struct SlavcMap {
    inner: LocalizationMap,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SlavcStatus {
    match e {
        Error::InvalidHyperparameter(_)
        | Error::ContractViolation(_)
        | Error::Validation { .. } => SlavcStatus::InvalidArgument,
        Error::Structural(_) => SlavcStatus::Structural,
        Error::Format(_) => SlavcStatus::Format,
        Error::Io { .. } => SlavcStatus::Io,
        Error::UndefinedMetric(_) | Error::EmptyGroup(_) => SlavcStatus::UndefinedMetric,
        Error::OracleFailure { .. } | Error::OptimizerFault { .. } | Error::Divergence { .. } => {
            SlavcStatus::InternalFault
        }
    }
}

struct Fail(SlavcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SlavcStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SlavcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlavcStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside slavc".into());
            SlavcStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SlavcStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed(map: LocalizationMap) -> *mut SlavcMap {
    Box::into_raw(Box::new(SlavcMap { inner: map }))
}

unsafe fn map_ref<'a>(map: *const SlavcMap) -> Result<&'a LocalizationMap, Fail> {
    map.as_ref().map(|m| &m.inner).ok_or_else(|| null("map"))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slavc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a `height x width` map from row-major values.
///
/// # Safety
/// `values` must point to `height * width` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_new(
    height: usize,
    width: usize,
    values: *const f64,
    out: *mut *mut SlavcMap,
) -> SlavcStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Fail(SlavcStatus::InvalidArgument, "extents overflow".into()))?;
        let data = input(values, n, "values")?.to_vec();
        let map = LocalizationMap::from_rows(height, width, data)?;
        store(out, boxed(map), "out")
    })
}

/// Center-prior baseline map.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_center_prior(
    height: usize,
    width: usize,
    radius_fraction: f64,
    out: *mut *mut SlavcMap,
) -> SlavcStatus {
    guard(|| {
        store(
            out,
            boxed(center_prior_map(height, width, radius_fraction)?),
            "out",
        )
    })
}

/// Reads a map file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_read(
    file: *const c_char,
    out: *mut *mut SlavcMap,
) -> SlavcStatus {
    guard(|| store(out, boxed(read_map(path(file)?)?), "out"))
}

/// Writes a map file.
///
/// # Safety
/// `map` must come from this library; `file` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_write(map: *const SlavcMap, file: *const c_char) -> SlavcStatus {
    guard(|| Ok(write_map(path(file)?, map_ref(map)?)?))
}

/// # Safety
/// `map` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_height(map: *const SlavcMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.height())
}

/// # Safety
/// `map` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_width(map: *const SlavcMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.width())
}

/// Maximum value of the map.
///
/// # Safety
/// `map` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_confidence(map: *const SlavcMap, out: *mut f64) -> SlavcStatus {
    guard(|| store(out, map_ref(map)?.confidence(), "out"))
}

/// Copies the row-major values into `out`, which holds `len` doubles.
///
/// # Safety
/// `map` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_values(
    map: *const SlavcMap,
    out: *mut f64,
    len: usize,
) -> SlavcStatus {
    guard(|| {
        let values = map_ref(map)?.values().data();
        if len != values.len() {
            return Err(Fail(
                SlavcStatus::InvalidArgument,
                format!("buffer holds {len} values, map has {}", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, len);
        Ok(())
    })
}

/// Releases a map. Null is ignored.
///
/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_free(map: *mut SlavcMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

fn dims(batch: usize, height: usize, width: usize, dim: usize) -> Result<(BatchDims, usize), Fail> {
    let d = BatchDims {
        batch,
        height,
        width,
        dim,
    };
    let len = batch
        .checked_mul(dim)
        .and_then(|a| a.checked_mul(2 + 2 * height.checked_mul(width)?))
        .ok_or_else(|| Fail(SlavcStatus::InvalidArgument, "extents overflow".into()))?;
    Ok((d, len))
}

/// Loss value and, if `grad` is non-null, its gradient with respect to the
/// online embeddings (same flat layout). `momentum` is read only by
/// [`SlavcLoss::Full`] and may be null otherwise.
///
/// # Safety
/// Embedding pointers must hold the flat layout for the given extents;
/// `grad`, if non-null, must hold as many doubles.
#[no_mangle]
pub unsafe extern "C" fn slavc_loss(
    kind: SlavcLoss,
    batch: usize,
    height: usize,
    width: usize,
    dim: usize,
    tau: f64,
    online: *const f64,
    momentum: *const f64,
    out_loss: *mut f64,
    grad: *mut f64,
) -> SlavcStatus {
    guard(|| {
        let (d, len) = dims(batch, height, width, dim)?;
        let hyper = Hyper::new(tau)?;
        let online = EmbeddingBatch::from_flat(d, Branch::Online, input(online, len, "online")?)?;
        let kind = match kind {
            SlavcLoss::Micl => LossKind::Micl,
            SlavcLoss::Slavc => LossKind::Slavc,
            SlavcLoss::Full => LossKind::Full,
        };
        let momentum = if kind == LossKind::Full {
            EmbeddingBatch::from_flat(d, Branch::Momentum, input(momentum, len, "momentum")?)?
        } else {
            online.clone()
        };
        let (value, g) = loss_and_grad(kind, &online, &momentum, &hyper)?;
        store(out_loss, value, "out_loss")?;
        if !grad.is_null() {
            let flat = g.to_flat();
            ptr::copy_nonoverlapping(flat.as_ptr(), grad, flat.len());
        }
        Ok(())
    })
}

/// Inference map of one audio against one frame.
///
/// # Safety
/// `audio_*` hold `dim` doubles, `visual_*` hold `height * width * dim`;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_inference_map(
    mode: SlavcInference,
    height: usize,
    width: usize,
    dim: usize,
    audio_loc: *const f64,
    audio_avc: *const f64,
    visual_loc: *const f64,
    visual_avc: *const f64,
    out: *mut *mut SlavcMap,
) -> SlavcStatus {
    guard(|| {
        let cells = height
            .checked_mul(width)
            .and_then(|c| c.checked_mul(dim))
            .ok_or_else(|| Fail(SlavcStatus::InvalidArgument, "extents overflow".into()))?;
        let mode = match mode {
            SlavcInference::Loc => InferenceMode::Loc,
            SlavcInference::Avc => InferenceMode::Avc,
            SlavcInference::Both => InferenceMode::Both,
        };
        let map = inference_map_with(
            mode,
            input(audio_loc, dim, "audio_loc")?,
            input(audio_avc, dim, "audio_avc")?,
            Bag::new(input(visual_loc, cells, "visual_loc")?, height, width, dim)?,
            Bag::new(input(visual_avc, cells, "visual_avc")?, height, width, dim)?,
        )?;
        store(out, boxed(map), "out")
    })
}

/// Consensus IoU between the prediction set of `map` and the boxes
/// (`x0, y0, x1, y1` quadruples, half-open, in map pixel coordinates).
///
/// # Safety
/// `map` must come from this library; `boxes` holds `4 * box_count` values.
#[no_mangle]
pub unsafe extern "C" fn slavc_map_iou(
    map: *const SlavcMap,
    threshold: SlavcThresholdKind,
    value: f64,
    boxes: *const u32,
    box_count: usize,
    out: *mut f64,
) -> SlavcStatus {
    guard(|| {
        let map = map_ref(map)?;
        let mode = match threshold {
            SlavcThresholdKind::Absolute => ThresholdMode::Absolute(value),
            SlavcThresholdKind::TopFraction => ThresholdMode::TopFraction(value),
            SlavcThresholdKind::HalfRange => ThresholdMode::HalfRange,
        };
        mode.validate()?;
        let raw = input(boxes, box_count * 4, "boxes")?;
        let boxes: Vec<PixelBox> = raw
            .chunks_exact(4)
            .map(|b| PixelBox::new(b[0], b[1], b[2], b[3]))
            .collect();
        if boxes.iter().any(|b| !b.is_valid()) {
            return Err(Fail(
                SlavcStatus::InvalidArgument,
                "box needs x0 < x1 and y0 < y1".into(),
            ));
        }
        let weights = rasterize_consensus(&boxes, map.height(), map.width())?;
        let gt = GroundTruth::new(weights, boxes, None, NegativeType::None)?;
        let pred = prediction_set(map.values(), mode);
        store(out, iou(&pred, &gt)?, "out")
    })
}

unsafe fn outcomes(p: *const SlavcOutcome, n: usize) -> Result<Vec<SampleOutcome>, Fail> {
    let width = n.to_string().len();
    Ok(input(p, n, "outcomes")?
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let id = format!("{k:0width$}");
            if o.positive {
                SampleOutcome::positive(id, o.iou, o.confidence)
            } else {
                SampleOutcome::negative(id, o.confidence, NegativeType::Real)
            }
        })
        .collect())
}

/// Fraction of positives with IoU above `gamma`.
///
/// # Safety
/// `items` holds `count` outcomes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_loc_acc(
    items: *const SlavcOutcome,
    count: usize,
    gamma: f64,
    out: *mut f64,
) -> SlavcStatus {
    guard(|| store(out, loc_acc(&outcomes(items, count)?, gamma)?, "out"))
}

/// Best F1 over confidence thresholds and the threshold achieving it
/// (minus infinity when every sample must be predicted).
///
/// # Safety
/// `items` holds `count` outcomes; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_max_f1(
    items: *const SlavcOutcome,
    count: usize,
    gamma: f64,
    out_f1: *mut f64,
    out_delta: *mut f64,
) -> SlavcStatus {
    guard(|| {
        let best = max_f1(&outcomes(items, count)?, gamma)?;
        store(out_f1, best.f1, "out_f1")?;
        store(out_delta, best.delta, "out_delta")
    })
}

/// Non-interpolated average precision.
///
/// # Safety
/// `items` holds `count` outcomes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slavc_average_precision(
    items: *const SlavcOutcome,
    count: usize,
    gamma: f64,
    out: *mut f64,
) -> SlavcStatus {
    guard(|| {
        store(
            out,
            average_precision(&outcomes(items, count)?, gamma)?,
            "out",
        )
    })
}
