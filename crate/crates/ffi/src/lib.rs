//! C ABI over `f0synth`.
//!
//! Every fallible function returns an [`F0sStatus`]; on failure a message is
//! kept per thread and can be read with [`f0s_last_error`]. Models and pools
//! are opaque heap handles released with their `_free` function. Buffers are
//! caller-owned; lengths are in elements.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use f0synth::anonymize::{self, F0Domain, F0Stats, GenderMode, SelectionParams, SpeakerPool};
use f0synth::featureio::Gender;
use f0synth::metrics;
use f0synth::model::{self, ModelParams};
use f0synth::Error;
use ndarray::ArrayView2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F0sStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    /// The requested ratio has an empty denominator.
    Undefined = 7,
    InsufficientPool = 8,
    Panic = 99,
}

/// Opaque trained model.
pub struct F0sModel {
    params: ModelParams,
}

/// Opaque speaker pool.
pub struct F0sPool {
    pool: SpeakerPool,
}

/// Pooled frame counts behind the pitch metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct F0sPitchCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub gross: u64,
    pub within_gross: u64,
    pub fine: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> F0sStatus {
    match err {
        Error::Io { .. } => F0sStatus::Io,
        Error::BadMagic(..) | Error::UnsupportedVersion(_) | Error::Truncated(_) | Error::Manifest(_) => {
            F0sStatus::Format
        }
        Error::NonFinite(_) => F0sStatus::NonFinite,
        Error::DimensionMismatch(_) | Error::LengthMismatch(..) | Error::FrameAlignment { .. } => {
            F0sStatus::DimensionMismatch
        }
        Error::InsufficientPool { .. } => F0sStatus::InsufficientPool,
        _ => F0sStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), F0sStatus>) -> F0sStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => F0sStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            F0sStatus::Panic
        }
    }
}

fn fail(err: Error) -> F0sStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn null(what: &str) -> F0sStatus {
    set_error(format!("null pointer: {what}"));
    F0sStatus::NullPointer
}

/// # Safety
/// `ptr` must be null or point to `len` readable elements.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], F0sStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to `len` writable elements.
unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], F0sStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, F0sStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(Error::InvalidArgument("path is not UTF-8".into())))?;
    Ok(PathBuf::from(s))
}

/// # Safety
/// `out` must be null or writable.
unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), F0sStatus> {
    if out.is_null() {
        return Err(null("output"));
    }
    *out = value;
    Ok(())
}

fn optional(v: Option<f64>, what: &str) -> Result<f64, F0sStatus> {
    v.ok_or_else(|| {
        set_error(format!("{what} undefined: empty denominator"));
        F0sStatus::Undefined
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn f0s_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_model_load(path: *const c_char, out: *mut *mut F0sModel) -> F0sStatus {
    guard(|| {
        let path = path_arg(path)?;
        let params = model::load_checkpoint(&path).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(F0sModel { params })))
    })
}

/// # Safety
/// `model` must be null or a handle from [`f0s_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f0s_model_free(model: *mut F0sModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Width of one raw input row (`d_xv + d_bn`), or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f0s_model_input_dim(model: *const F0sModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.config.input_dim)
}

/// Predicts a masked F0 contour (Hz, 0 = unvoiced) from `n_frames` raw rows
/// `[xvec ∥ bn]`, row-major. `out_pv` may be null.
///
/// # Safety
/// `features` must hold `n_frames * input_dim` values; `out_f0` (and
/// `out_pv` when non-null) must hold `n_frames` values.
#[no_mangle]
pub unsafe extern "C" fn f0s_model_predict(
    model: *const F0sModel,
    features: *const f64,
    n_frames: usize,
    input_dim: usize,
    out_f0: *mut f64,
    out_pv: *mut f64,
) -> F0sStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice(features, n_frames * input_dim, "features")?;
        let view = ArrayView2::from_shape((n_frames, input_dim), x)
            .map_err(|e| fail(Error::DimensionMismatch(e.to_string())))?;
        let (f0, pv) = model::predict_f0(&m.params, view).map_err(fail)?;
        slice_mut(out_f0, n_frames, "out_f0")?.copy_from_slice(&f0);
        if !out_pv.is_null() {
            slice_mut(out_pv, n_frames, "out_pv")?.copy_from_slice(&pv);
        }
        Ok(())
    })
}

/// # Safety
/// `pred` and `truth` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_pitch_counts(
    pred: *const f64,
    truth: *const f64,
    n: usize,
    out: *mut F0sPitchCounts,
) -> F0sStatus {
    guard(|| {
        let c = metrics::pitch_counts(slice(pred, n, "pred")?, slice(truth, n, "truth")?).map_err(fail)?;
        write_out(
            out,
            F0sPitchCounts {
                tp: c.confusion.tp,
                fp: c.confusion.fp,
                tn: c.confusion.tn,
                fn_: c.confusion.fn_,
                gross: c.gross,
                within_gross: c.within_gross,
                fine: c.fine,
            },
        )
    })
}

type RatioFn = fn(&metrics::PitchCounts) -> Option<f64>;

unsafe fn ratio_metric(
    pred: *const f64,
    truth: *const f64,
    n: usize,
    out: *mut f64,
    f: RatioFn,
    what: &str,
) -> F0sStatus {
    guard(|| {
        let c = metrics::pitch_counts(slice(pred, n, "pred")?, slice(truth, n, "truth")?).map_err(fail)?;
        write_out(out, optional(f(&c), what)?)
    })
}

/// Gross pitch error; `F0S_STATUS_UNDEFINED` when no frame is voiced in both.
///
/// # Safety
/// `pred` and `truth` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_gpe(pred: *const f64, truth: *const f64, n: usize, out: *mut f64) -> F0sStatus {
    ratio_metric(pred, truth, n, out, metrics::PitchCounts::gpe, "gpe")
}

/// Fine pitch error.
///
/// # Safety
/// `pred` and `truth` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_fpe(pred: *const f64, truth: *const f64, n: usize, out: *mut f64) -> F0sStatus {
    ratio_metric(pred, truth, n, out, metrics::PitchCounts::fpe, "fpe")
}

/// Fraction of accurately processed frames.
///
/// # Safety
/// `pred` and `truth` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_accurately_processed(
    pred: *const f64,
    truth: *const f64,
    n: usize,
    out: *mut f64,
) -> F0sStatus {
    ratio_metric(
        pred,
        truth,
        n,
        out,
        metrics::PitchCounts::accurately_processed,
        "accurately_processed",
    )
}

/// Pearson correlation over frames voiced in both contours.
///
/// # Safety
/// `a` and `b` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_pitch_correlation(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> F0sStatus {
    guard(|| {
        let r = metrics::pitch_correlation(slice(a, n, "a")?, slice(b, n, "b")?).map_err(fail)?;
        write_out(out, optional(r, "pitch correlation")?)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_cents_error(pred_hz: f64, truth_hz: f64, out: *mut f64) -> F0sStatus {
    guard(|| write_out(out, metrics::cents_error(pred_hz, truth_hz).map_err(fail)?))
}

/// Shift-and-scale F0 modification. `log_domain != 0` selects the log mapping.
///
/// # Safety
/// `f0` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn f0s_shift_scale(
    f0: *const f64,
    n: usize,
    src_mean: f64,
    src_std: f64,
    tgt_mean: f64,
    tgt_std: f64,
    log_domain: i32,
    out: *mut f64,
) -> F0sStatus {
    guard(|| {
        let domain = if log_domain != 0 {
            F0Domain::Log
        } else {
            F0Domain::Linear
        };
        let mapped = anonymize::shift_scale_f0(
            slice(f0, n, "f0")?,
            F0Stats {
                mean: src_mean,
                std: src_std,
            },
            F0Stats {
                mean: tgt_mean,
                std: tgt_std,
            },
            domain,
        )
        .map_err(fail)?;
        slice_mut(out, n, "out")?.copy_from_slice(&mapped);
        Ok(())
    })
}

/// Loads a pool CSV (`speaker_id,gender,xvec_path,f0_mean,f0_std`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_pool_load(path: *const c_char, out: *mut *mut F0sPool) -> F0sStatus {
    guard(|| {
        let path = path_arg(path)?;
        let pool = anonymize::load_pool(&path).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(F0sPool { pool })))
    })
}

/// # Safety
/// `pool` must be null or a handle from [`f0s_pool_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f0s_pool_free(pool: *mut F0sPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Number of pool entries, or 0 for a null handle.
///
/// # Safety
/// `pool` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f0s_pool_len(pool: *const F0sPool) -> usize {
    pool.as_ref().map_or(0, |p| p.pool.entries().len())
}

/// Selects a pseudo speaker with cosine ranking. `source_gender` is `'F'` or
/// `'M'`; `opposite != 0` targets the other gender. Writes the averaged
/// x-vector (`dim` values) and the averaged F0 statistics.
///
/// # Safety
/// `source_xvec` and `out_xvec` must hold `dim` values; `out_mean` and
/// `out_std` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0s_pool_select(
    pool: *const F0sPool,
    source_xvec: *const f64,
    dim: usize,
    source_gender: c_char,
    opposite: i32,
    n: usize,
    k: usize,
    seed: u64,
    out_xvec: *mut f64,
    out_mean: *mut f64,
    out_std: *mut f64,
) -> F0sStatus {
    guard(|| {
        let p = pool.as_ref().ok_or_else(|| null("pool"))?;
        let gender = match source_gender as u8 {
            b'F' => Gender::F,
            b'M' => Gender::M,
            g => return Err(fail(Error::UnknownGender((g as char).to_string()))),
        };
        let params = SelectionParams {
            gender_mode: if opposite != 0 {
                GenderMode::Opposite
            } else {
                GenderMode::Same
            },
            n,
            k,
            ..SelectionParams::default()
        };
        let src = slice(source_xvec, dim, "source_xvec")?;
        let pseudo = anonymize::select_pseudo_speaker(&p.pool, src, gender, &params, seed).map_err(fail)?;
        slice_mut(out_xvec, dim, "out_xvec")?.copy_from_slice(&pseudo.xvec);
        write_out(out_mean, pseudo.stats.mean)?;
        write_out(out_std, pseudo.stats.std)
    })
}
