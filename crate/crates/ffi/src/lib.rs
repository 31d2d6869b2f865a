//! C interface to `uplift-core`.
//!
//! Datasets and models are opaque handles created by `uplift_*` functions
//! and released with the matching `_free`. Every fallible call returns an
//! [`UpliftStatus`]; on failure [`uplift_last_error`] describes the error
//! for the calling thread. Panics are caught at the boundary and reported as
//! `UPLIFT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use uplift_core::dataset::{empirical_treatment_probs, load_csv, Dataset, Schema, TreatmentProbs};
use uplift_core::evaluation::{evaluate_assignments, predict_rows, EvaluationReport};
use uplift_core::{train_cts, train_sma, ForestParams, SmaParams, UpliftError, UpliftModel as CoreModel};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpliftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed CSV, header mismatch, bad cell or bad treatment labels.
    Parse = 4,
    Schema = 5,
    InvalidParameter = 6,
    SchemaMismatch = 7,
    ModelFormat = 8,
    VersionMismatch = 9,
    EmptyDataset = 10,
    TreatmentAbsent = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&UpliftError> for UpliftStatus {
    fn from(e: &UpliftError) -> Self {
        match e {
            UpliftError::Io { .. } => UpliftStatus::Io,
            UpliftError::Csv(_)
            | UpliftError::HeaderMismatch(_)
            | UpliftError::Parse { .. }
            | UpliftError::NonDenseTreatments(_) => UpliftStatus::Parse,
            UpliftError::Schema(_) => UpliftStatus::Schema,
            UpliftError::InvalidParameter(_) | UpliftError::Config(_) => UpliftStatus::InvalidParameter,
            UpliftError::SchemaMismatch(_) => UpliftStatus::SchemaMismatch,
            UpliftError::ModelFormat(_) | UpliftError::Json(_) => UpliftStatus::ModelFormat,
            UpliftError::VersionMismatch { .. } => UpliftStatus::VersionMismatch,
            UpliftError::EmptyDataset => UpliftStatus::EmptyDataset,
            UpliftError::TreatmentAbsent(_) => UpliftStatus::TreatmentAbsent,
        }
    }
}

/// Opaque dataset handle.
pub struct UpliftDataset(Dataset);

/// Opaque model handle (CTS forest or separate-model baseline).
pub struct UpliftModel(CoreModel);

/// CTS forest parameters. Zero `max_depth` means unlimited, zero
/// `bootstrap` means one row per training row.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct UpliftCtsParams {
    pub ntree: usize,
    pub min_split: usize,
    pub n_reg: usize,
    pub mtry: usize,
    pub max_depth: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct UpliftSmaParams {
    pub ntree: usize,
    pub mtry: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

/// Expected-response estimate with a normal confidence interval.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct UpliftReport {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub conf_level: f64,
    pub n: usize,
}

impl From<&EvaluationReport> for UpliftReport {
    fn from(r: &EvaluationReport) -> Self {
        UpliftReport {
            estimate: r.estimate,
            std_error: r.std_error,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            conf_level: r.conf_level,
            n: r.n,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(UpliftStatus, String);

impl From<UpliftError> for Failure {
    fn from(e: UpliftError) -> Self {
        Failure(UpliftStatus::from(&e), format!("{}: {e}", e.kind()))
    }
}

fn fail(status: UpliftStatus, msg: &str) -> Failure {
    Failure(status, msg.to_string())
}

/// Runs `f`, recording any error or panic for [`uplift_last_error`].
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UpliftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UpliftStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            UpliftStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(UpliftStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(UpliftStatus::InvalidUtf8, &format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(UpliftStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(UpliftStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn probs_arg(probs: *const f64, n_probs: usize, data: &Dataset) -> Result<TreatmentProbs, Failure> {
    if n_probs == 0 {
        return Ok(empirical_treatment_probs(data)?);
    }
    if probs.is_null() {
        return Err(fail(UpliftStatus::NullPointer, "probs is null"));
    }
    Ok(TreatmentProbs::new(slice::from_raw_parts(probs, n_probs).to_vec())?)
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn uplift_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a CSV file. `schema_spec` is `name:role,...` with roles `numeric`,
/// `categorical`, `treatment`, `response`, listing every column in order.
///
/// # Safety
/// `path` and `schema_spec` must be NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_dataset_load_csv(
    path: *const c_char,
    schema_spec: *const c_char,
    out: *mut *mut UpliftDataset,
) -> UpliftStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let schema = Schema::parse_spec(str_arg(schema_spec, "schema_spec")?)?;
        let data = load_csv(&path, &schema)?;
        *out = Box::into_raw(Box::new(UpliftDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle from `uplift_dataset_load_csv` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uplift_dataset_free(data: *mut UpliftDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uplift_dataset_len(data: *const UpliftDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uplift_dataset_n_features(data: *const UpliftDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uplift_dataset_n_treatments(data: *const UpliftDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_treatments())
}

/// Default CTS parameters for `n_features` features.
#[no_mangle]
pub extern "C" fn uplift_cts_params_default(n_features: usize) -> UpliftCtsParams {
    let p = ForestParams::defaults_for(n_features);
    UpliftCtsParams {
        ntree: p.ntree,
        min_split: p.tree.min_split,
        n_reg: p.tree.n_reg,
        mtry: p.tree.mtry,
        max_depth: 0,
        bootstrap: 0,
        seed: p.seed,
    }
}

/// Default separate-model parameters for `n_features` features.
#[no_mangle]
pub extern "C" fn uplift_sma_params_default(n_features: usize) -> UpliftSmaParams {
    let p = SmaParams::defaults_for(n_features);
    UpliftSmaParams {
        ntree: p.ntree,
        mtry: p.mtry,
        min_samples_leaf: p.min_samples_leaf,
        seed: p.seed,
    }
}

/// # Safety
/// `data` and `params` must be live/readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_train_cts(
    data: *const UpliftDataset,
    params: *const UpliftCtsParams,
    out: *mut *mut UpliftModel,
) -> UpliftStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = &ref_arg(data, "data")?.0;
        let c = ref_arg(params, "params")?;
        let mut p = ForestParams::defaults_for(data.n_features());
        p.ntree = c.ntree;
        p.tree.min_split = c.min_split;
        p.tree.n_reg = c.n_reg;
        p.tree.mtry = c.mtry;
        p.tree.max_depth = (c.max_depth > 0).then_some(c.max_depth);
        p.bootstrap = (c.bootstrap > 0).then_some(c.bootstrap);
        p.seed = c.seed;
        let model = train_cts(data, &p)?;
        *out = Box::into_raw(Box::new(UpliftModel(model.into())));
        Ok(())
    })
}

/// # Safety
/// `data` and `params` must be live/readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_train_sma(
    data: *const UpliftDataset,
    params: *const UpliftSmaParams,
    out: *mut *mut UpliftModel,
) -> UpliftStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = &ref_arg(data, "data")?.0;
        let c = ref_arg(params, "params")?;
        let p = SmaParams {
            ntree: c.ntree,
            mtry: c.mtry,
            min_samples_leaf: c.min_samples_leaf,
            seed: c.seed,
        };
        let model = train_sma(data, &p)?;
        *out = Box::into_raw(Box::new(UpliftModel(model.into())));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_load(path: *const c_char, out: *mut *mut UpliftModel) -> UpliftStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = CoreModel::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(UpliftModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_save(model: *const UpliftModel, path: *const c_char) -> UpliftStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        model.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_free(model: *mut UpliftModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_n_features(model: *const UpliftModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_features())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_n_treatments(model: *const UpliftModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_treatments())
}

/// Predicts one feature vector (categorical features as codes). Writes one
/// estimate per treatment to `estimates` and the chosen treatment to `chosen`.
///
/// # Safety
/// `x` must hold `n_x` values, `estimates` room for `n_estimates`, and
/// `chosen` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_model_predict(
    model: *const UpliftModel,
    x: *const f64,
    n_x: usize,
    estimates: *mut f64,
    n_estimates: usize,
    chosen: *mut usize,
) -> UpliftStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let chosen = out_arg(chosen, "chosen")?;
        if x.is_null() || estimates.is_null() {
            return Err(fail(UpliftStatus::NullPointer, "x or estimates is null"));
        }
        let k = model.n_treatments();
        if n_estimates < k {
            return Err(fail(
                UpliftStatus::BufferTooSmall,
                &format!("estimates holds {n_estimates}, need {k}"),
            ));
        }
        let p = model.predict(slice::from_raw_parts(x, n_x))?;
        slice::from_raw_parts_mut(estimates, k).copy_from_slice(&p.per_treatment);
        *chosen = p.chosen;
        Ok(())
    })
}

/// Expected response of the model's policy on `data`. With `n_probs == 0`
/// the treatment frequencies of `data` serve as assignment probabilities.
///
/// # Safety
/// Handles must be live; `probs` must hold `n_probs` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_evaluate_model(
    model: *const UpliftModel,
    data: *const UpliftDataset,
    probs: *const f64,
    n_probs: usize,
    conf_level: f64,
    out: *mut UpliftReport,
) -> UpliftStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let data = &ref_arg(data, "data")?.0;
        let out = out_arg(out, "out")?;
        model.check_compatible(data)?;
        let probs = probs_arg(probs, n_probs, data)?;
        let chosen: Vec<usize> = predict_rows(data, |x| model.predict_unchecked(x))
            .into_iter()
            .map(|p| p.chosen)
            .collect();
        *out = (&evaluate_assignments(data, &chosen, &probs, conf_level)?).into();
        Ok(())
    })
}

/// Expected response of assigning `treatment` to every row of `data`.
///
/// # Safety
/// `data` must be live; `probs` must hold `n_probs` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uplift_evaluate_constant(
    data: *const UpliftDataset,
    treatment: usize,
    probs: *const f64,
    n_probs: usize,
    conf_level: f64,
    out: *mut UpliftReport,
) -> UpliftStatus {
    guard(|| {
        let data = &ref_arg(data, "data")?.0;
        let out = out_arg(out, "out")?;
        let probs = probs_arg(probs, n_probs, data)?;
        let chosen = vec![treatment; data.len()];
        *out = (&evaluate_assignments(data, &chosen, &probs, conf_level)?).into();
        Ok(())
    })
}
