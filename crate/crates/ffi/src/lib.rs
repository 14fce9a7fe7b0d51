//! C ABI over `callpred`.
//!
//! Handles are opaque pointers created by `cp_*_load`/`cp_model_train` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CpStatus`]; on failure `cp_last_error()` describes the most recent error
//! on the calling thread. Strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use callpred::behavior::{EgoModelConfig, FilteredEgo};
use callpred::calldata::{parse_call_log, Dataset, TimeZone};
use callpred::classifier::TrainConfig;
use callpred::evaluation::{history_before, rank_classes};
use callpred::model::EgoModel;
use callpred::stats::{chi_square_sf, ks_exponential, ljung_box};
use callpred::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    MalformedInput = 4,
    InvalidArgument = 5,
    UnknownEgo = 6,
    NotEligible = 7,
    Numerical = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A parsed call log.
pub struct CpDataset {
    inner: Dataset,
}

/// A trained per-ego model plus its class ids as C strings.
pub struct CpModel {
    inner: EgoModel,
    class_ids: Vec<CString>,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CpTrainOptions {
    pub min_events: usize,
    pub train_fraction: f64,
    pub reg_lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CpQTest {
    pub q_statistic: f64,
    pub lags_used: usize,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CpKsResult {
    pub d_statistic: f64,
    pub n: usize,
    pub rate_estimate: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(CpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => CpStatus::Io,
            Error::MalformedRow { .. } | Error::UnknownDirection(_) | Error::ModelFormat(_) => {
                CpStatus::MalformedInput
            }
            Error::TooFewEvents { .. }
            | Error::SingleClass
            | Error::NoOutgoingCalls(_)
            | Error::NoTestCalls
            | Error::NoEligibleEgos
            | Error::EmptyClassSet => CpStatus::NotEligible,
            Error::NonFiniteLoss | Error::ZeroVariance => CpStatus::Numerical,
            _ => CpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: CpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, recording any error or panic for `cp_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(CpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(CpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(CpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(CpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread. Valid until the next
/// call that fails on the same thread; never null.
#[no_mangle]
pub extern "C" fn cp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn cp_train_options_default() -> CpTrainOptions {
    let m = EgoModelConfig::default();
    let t = TrainConfig::default();
    CpTrainOptions {
        min_events: m.min_events,
        train_fraction: m.train_fraction,
        reg_lambda: t.reg_lambda,
        max_iters: t.max_iters,
        tol: t.tol,
    }
}

/// Parses a call-log CSV. `utc_offset_secs` is the dataset's fixed offset.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_load(
    path: *const c_char,
    utc_offset_secs: i32,
    out: *mut *mut CpDataset,
) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let tz = TimeZone::from_offset_secs(utc_offset_secs)?;
        let inner = parse_call_log(Path::new(path), None, tz)?;
        *out = Box::into_raw(Box::new(CpDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from `cp_dataset_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_free(dataset: *mut CpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_n_egos(dataset: *const CpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.egos.len())
}

/// # Safety
/// `dataset` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_n_events(dataset: *const CpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_events())
}

/// Copies the id of ego `index` (in sorted order) into `buf`, NUL included.
/// `*needed` receives the required size even when `buf` is too small.
///
/// # Safety
/// `buf` must hold `buf_len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_ego_id(
    dataset: *const CpDataset,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> CpStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let ego = d
            .inner
            .egos
            .get(index)
            .ok_or_else(|| fail(CpStatus::InvalidArgument, format!("ego index {index} out of range")))?;
        let bytes = ego.ego_id.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if buf.is_null() || buf_len < bytes.len() + 1 {
            return Err(fail(CpStatus::BufferTooSmall, "buffer too small for ego id"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Trains the model for one ego. `options` may be null for defaults.
///
/// # Safety
/// Pointers must be valid; `ego_id` a C string.
#[no_mangle]
pub unsafe extern "C" fn cp_model_train(
    dataset: *const CpDataset,
    ego_id: *const c_char,
    options: *const CpTrainOptions,
    out: *mut *mut CpModel,
) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let d = ref_arg(dataset, "dataset")?;
        let ego_id = str_arg(ego_id, "ego_id")?;
        let o = options.as_ref().copied().unwrap_or_else(|| cp_train_options_default());
        let log = d
            .inner
            .ego(ego_id)
            .ok_or_else(|| fail(CpStatus::UnknownEgo, format!("no ego {ego_id:?} in dataset")))?;
        let ego_config = EgoModelConfig {
            min_events: o.min_events,
            train_fraction: o.train_fraction,
        };
        let train_config = TrainConfig {
            reg_lambda: o.reg_lambda,
            max_iters: o.max_iters,
            tol: o.tol,
        };
        let ego = FilteredEgo::prepare(log, &ego_config)?;
        let model = EgoModel::fit(&ego, d.inner.timezone, &train_config)?;
        *out = Box::into_raw(Box::new(wrap_model(model)?));
        Ok(())
    })
}

fn wrap_model(inner: EgoModel) -> Result<CpModel, Failure> {
    let class_ids = inner
        .class_set
        .iter()
        .map(|c| CString::new(c.as_str()))
        .collect::<Result<_, _>>()
        .map_err(|_| fail(CpStatus::MalformedInput, "class id contains NUL"))?;
    Ok(CpModel { inner, class_ids })
}

/// # Safety
/// `path` must be a C string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cp_model_load(path: *const c_char, out: *mut *mut CpModel) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let model = wrap_model(EgoModel::load(path)?)?;
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// # Safety
/// `model` must be live, `path` a C string.
#[no_mangle]
pub unsafe extern "C" fn cp_model_save(model: *const CpModel, path: *const c_char) -> CpStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        m.inner.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_model_free(model: *mut CpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn cp_model_n_classes(model: *const CpModel) -> usize {
    model.as_ref().map_or(0, |m| m.class_ids.len())
}

/// Id of class `index`, owned by the model; null when out of range.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cp_model_class_id(model: *const CpModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.class_ids.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

unsafe fn probabilities(model: *const CpModel, dataset: *const CpDataset, t: i64) -> Result<Vec<f64>, Failure> {
    let m = ref_arg(model, "model")?;
    let d = ref_arg(dataset, "dataset")?;
    let log = d.inner.ego(&m.inner.ego_id).ok_or_else(|| {
        fail(CpStatus::UnknownEgo, format!("dataset has no ego {:?}", m.inner.ego_id))
    })?;
    let probs = m.inner.predict_proba(history_before(&log.events, t), t)?;
    Ok(probs)
}

/// Class probabilities at instant `t` (epoch seconds), using the ego's
/// events in `dataset` strictly before `t` as history. Writes
/// `cp_model_n_classes` values to `probs`.
///
/// # Safety
/// `probs` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cp_model_predict_proba(
    model: *const CpModel,
    dataset: *const CpDataset,
    t: i64,
    probs: *mut f64,
    len: usize,
) -> CpStatus {
    guard(|| {
        let p = probabilities(model, dataset, t)?;
        if probs.is_null() || len < p.len() {
            return Err(fail(CpStatus::BufferTooSmall, format!("need room for {} probabilities", p.len())));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), probs, p.len());
        Ok(())
    })
}

/// Indices of the `k` most probable classes at `t`, best first. Writes
/// `min(k, n_classes)` entries and stores that count in `*written`.
///
/// # Safety
/// `indices` must hold `k` entries; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_model_top_k(
    model: *const CpModel,
    dataset: *const CpDataset,
    t: i64,
    k: usize,
    indices: *mut usize,
    written: *mut usize,
) -> CpStatus {
    guard(|| {
        let written = out_arg(written, "written")?;
        *written = 0;
        if k == 0 {
            return Err(fail(CpStatus::InvalidArgument, "k must be at least 1"));
        }
        if indices.is_null() {
            return Err(fail(CpStatus::NullPointer, "indices is null"));
        }
        let p = probabilities(model, dataset, t)?;
        let order = rank_classes(&p);
        let n = k.min(order.len());
        ptr::copy_nonoverlapping(order.as_ptr(), indices, n);
        *written = n;
        Ok(())
    })
}

/// Ljung–Box test of `series` with `max_lag` lags (capped at n/4).
///
/// # Safety
/// `series` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_ljung_box(
    series: *const f64,
    n: usize,
    max_lag: usize,
    out: *mut CpQTest,
) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = ljung_box(slice_arg(series, n, "series")?, max_lag)?;
        *out = CpQTest {
            q_statistic: r.q_statistic,
            lags_used: r.lags_used,
            p_value: r.p_value,
            reject_at_5pct: r.reject_at_5pct,
        };
        Ok(())
    })
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_chi_square_sf(x: f64, df: u32, out: *mut f64) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if df == 0 || x.is_nan() {
            return Err(fail(CpStatus::InvalidArgument, "df must be positive and x a number"));
        }
        *out = chi_square_sf(x, df);
        Ok(())
    })
}

/// One-sample KS test of positive `samples` against an exponential with
/// the maximum-likelihood rate.
///
/// # Safety
/// `samples` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_ks_exponential(
    samples: *const f64,
    n: usize,
    out: *mut CpKsResult,
) -> CpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = ks_exponential(slice_arg(samples, n, "samples")?)?;
        *out = CpKsResult {
            d_statistic: r.d_statistic,
            n: r.n,
            rate_estimate: r.rate_estimate,
            p_value: r.p_value,
            reject_at_5pct: r.reject_at_5pct,
        };
        Ok(())
    })
}
