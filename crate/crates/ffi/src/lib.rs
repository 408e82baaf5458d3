//! C ABI over the skelact library.
//!
//! Objects cross the boundary as opaque handles (`SkClip`, `SkModel`) that the
//! caller frees with the matching `*_free` function. Every fallible entry point
//! returns an `SkStatus`; on failure a message is kept per thread and can be read
//! with `sk_last_error` until the next failing call on that thread. Panics are
//! caught and reported as `SK_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use skelact::pipeline::{classify_clip, load_model, resolve_actor, sample_frames, PipelineConfig, SamplingMode};
use skelact::pose_io::{parse_pose_json, Clip};
use skelact::tracking::{hungarian, CostMatrix};
use skelact::two_stream::{Streams, TwoStreamModel};
use skelact::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed pose JSON.
    Schema = 3,
    /// Well-formed input the pipeline cannot process (too few frames, no person, ...).
    Data = 4,
    Io = 5,
    Config = 6,
    /// Corrupt or unsupported checkpoint.
    Checkpoint = 7,
    /// An output buffer is shorter than required.
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStreams {
    Hp = 1,
    HpOhp = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkSampling {
    Informative = 0,
    Uniform = 1,
}

/// A parsed pose clip.
pub struct SkClip(Clip);

/// A trained two-stream model with the pipeline settings it was trained under.
pub struct SkModel {
    model: TwoStreamModel,
    pipeline: PipelineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SkStatus {
    match e {
        Error::Schema(_) => SkStatus::Schema,
        Error::Io { .. } => SkStatus::Io,
        Error::Config(_) => SkStatus::Config,
        Error::Version { .. } | Error::Corruption(_) => SkStatus::Checkpoint,
        Error::Strategy | Error::ShapeMismatch(_) => SkStatus::Internal,
        _ => SkStatus::Data,
    }
}

struct Fail(SkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SkStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(SkStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SkStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len < needed {
        return Err(Fail(SkStatus::BufferTooSmall, format!("{name} holds {len}, need {needed}")));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses pose JSON of `len` bytes into a new clip handle.
///
/// # Safety
/// `json` must point to `len` readable bytes and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sk_clip_parse(json: *const u8, len: usize, out: *mut *mut SkClip) -> SkStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(json, "json")?;
        let clip = parse_pose_json(std::slice::from_raw_parts(json, len))?;
        *out = Box::into_raw(Box::new(SkClip(clip)));
        Ok(())
    })
}

/// Number of frames in the clip; 0 for a null handle.
///
/// # Safety
/// `clip` must be null or a live handle from `sk_clip_parse`.
#[no_mangle]
pub unsafe extern "C" fn sk_clip_num_frames(clip: *const SkClip) -> usize {
    clip.as_ref().map_or(0, |c| c.0.frames.len())
}

/// # Safety
/// `clip` must be null or a handle from `sk_clip_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_clip_free(clip: *mut SkClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Picks `segments` frames of the clip's actor. Writes their positions in the
/// clip (ascending) to `positions`, which must hold at least `segments` entries.
///
/// # Safety
/// `clip` must be a live handle; `positions` must point to `capacity` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sk_clip_sample(
    clip: *const SkClip,
    segments: usize,
    mode: SkSampling,
    positions: *mut usize,
    capacity: usize,
) -> SkStatus {
    guard(|| {
        non_null(clip, "clip")?;
        let out = out_slice(positions, capacity, segments, "positions")?;
        let mut c = (*clip).0.clone();
        let actor = resolve_actor(&mut c, PipelineConfig::default().max_misses)?;
        let mode = match mode {
            SkSampling::Informative => SamplingMode::Informative,
            SkSampling::Uniform => SamplingMode::Uniform,
        };
        let sampled = sample_frames(&c, &actor, segments, mode)?;
        out.copy_from_slice(&sampled.positions);
        Ok(())
    })
}

/// Loads a trained model directory (`run.cfg`, `hp.ckpt`, optional `ohp.ckpt`).
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_model_load(dir: *const c_char, out: *mut *mut SkModel) -> SkStatus {
    guard(|| {
        non_null(out, "out")?;
        let dir = str_arg(dir, "dir")?;
        let (model, cfg, _) = load_model(Path::new(dir))?;
        *out = Box::into_raw(Box::new(SkModel { model, pipeline: cfg.pipeline }));
        Ok(())
    })
}

/// Number of classes the model predicts; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle from `sk_model_load`.
#[no_mangle]
pub unsafe extern "C" fn sk_model_num_classes(model: *const SkModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.hp.config.num_classes)
}

/// # Safety
/// `model` must be null or a handle from `sk_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_model_free(model: *mut SkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies a clip. Writes `sk_model_num_classes` probabilities; the
/// predicted class and stream set are written when their pointers are non-null.
///
/// # Safety
/// Handles must be live; `probabilities` must point to `capacity` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sk_model_infer(
    model: *const SkModel,
    clip: *const SkClip,
    probabilities: *mut f64,
    capacity: usize,
    predicted_class: *mut usize,
    streams_used: *mut SkStreams,
) -> SkStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(clip, "clip")?;
        let m = &*model;
        let p = classify_clip(&m.model, &m.pipeline, &(*clip).0)?;
        out_slice(probabilities, capacity, p.probabilities.len(), "probabilities")?.copy_from_slice(&p.probabilities);
        if let Some(o) = predicted_class.as_mut() {
            *o = p.predicted_class;
        }
        if let Some(o) = streams_used.as_mut() {
            *o = match p.streams_used {
                Streams::Hp => SkStreams::Hp,
                Streams::HpOhp => SkStreams::HpOhp,
            };
        }
        Ok(())
    })
}

/// Minimum-cost assignment on a row-major `rows` x `cols` matrix. Writes the
/// matched column of each row to `row_to_col` (-1 when unmatched) and the total
/// cost to `total` when non-null.
///
/// # Safety
/// `cost` must point to `rows * cols` readable values and `row_to_col` to `rows` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sk_hungarian(cost: *const f64, rows: usize, cols: usize, row_to_col: *mut isize, total: *mut f64) -> SkStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| Fail(SkStatus::Data, "matrix too large".into()))?;
        let data = if n == 0 {
            Vec::new()
        } else {
            non_null(cost, "cost")?;
            std::slice::from_raw_parts(cost, n).to_vec()
        };
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Fail(SkStatus::Data, "costs must be finite".into()));
        }
        let out = out_slice(row_to_col, rows, rows, "row_to_col")?;
        let a = hungarian(&CostMatrix::new(rows, cols, data));
        for (o, c) in out.iter_mut().zip(&a.row_to_col) {
            *o = c.map_or(-1, |c| c as isize);
        }
        if let Some(t) = total.as_mut() {
            *t = a.total;
        }
        Ok(())
    })
}
