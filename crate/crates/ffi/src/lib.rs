//! C ABI for `stfnn`.
//!
//! Datasets and models are opaque handles created and released through this
//! interface. Every fallible function returns an [`StfnnStatus`] code; the
//! message of the last failure on the calling thread is available from
//! [`stfnn_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use stfnn::harness::{ingest, kfold_cv, load_model, save_model, CvOptions, DatasetManifest};
use stfnn::models::{default_bandwidth_grid, select_bandwidth, EstimatorSpec, TrainedModel};
use stfnn::simgen::{self, SimConfig};
use stfnn::{Curve, Error, FunctionalSample, SpatialDataset, TimeGrid};

/// Result codes.
#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StfnnStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input: bad arguments, malformed files, unknown names.
    Invalid = 2,
    /// Singular fits, degenerate weights, diverged training.
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// A spatial functional dataset.
pub struct StfnnDataset {
    inner: SpatialDataset,
    features: Vec<String>,
}

/// A trained estimator.
pub struct StfnnModel {
    inner: TrainedModel,
    features: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> StfnnStatus {
    match e {
        Error::Io { .. } => StfnnStatus::Io,
        Error::Context { source, .. } if matches!(**source, Error::Io { .. }) => StfnnStatus::Io,
        e if e.is_numerical() => StfnnStatus::Numerical,
        _ => StfnnStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (StfnnStatus, String)>) -> StfnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StfnnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            StfnnStatus::Panic
        }
    }
}

fn fail(e: Error) -> (StfnnStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (StfnnStatus, String) {
    (StfnnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (StfnnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (StfnnStatus::Invalid, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (StfnnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn default_features(n: usize) -> Vec<String> {
    (1..=n).map(|r| format!("x{r}")).collect()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stfnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Simulate a dataset; `scenario` is "sim1" or "sim2".
///
/// # Safety
/// `scenario` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_simulate(
    scenario: *const c_char,
    seed: u64,
    out: *mut *mut StfnnDataset,
) -> StfnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scenario = text(scenario, "scenario")?.parse().map_err(fail)?;
        let inner = simgen::generate(&SimConfig::new(scenario, seed)).map_err(fail)?;
        let features = default_features(inner.n_features());
        *out = Box::into_raw(Box::new(StfnnDataset { inner, features }));
        Ok(())
    })
}

/// Load a dataset described by a manifest file.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_load(manifest_path: *const c_char, out: *mut *mut StfnnDataset) -> StfnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = text(manifest_path, "manifest_path")?;
        let manifest = DatasetManifest::load(Path::new(path)).map_err(fail)?;
        let inner = ingest(&manifest).map_err(fail)?;
        *out = Box::into_raw(Box::new(StfnnDataset {
            inner,
            features: manifest.features,
        }));
        Ok(())
    })
}

/// Build a single-feature dataset from row-major arrays: `curves` holds `n`
/// curves of `grid_points` values on a uniform grid over
/// `[t_lower, t_upper]`, `locations` holds `n` rows of `dim` coordinates.
///
/// # Safety
/// The arrays must hold `n * grid_points`, `n * dim` and `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_from_arrays(
    n: usize,
    grid_points: usize,
    t_lower: f64,
    t_upper: f64,
    curves: *const f64,
    dim: usize,
    locations: *const f64,
    responses: *const f64,
    out: *mut *mut StfnnDataset,
) -> StfnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let values = slice(curves, n * grid_points, "curves")?;
        let locs = slice(locations, n * dim, "locations")?;
        let y = slice(responses, n, "responses")?;
        let grid = Arc::new(TimeGrid::uniform(t_lower, t_upper, grid_points).map_err(fail)?);
        let samples = values
            .chunks(grid_points.max(1))
            .take(n)
            .map(|c| Curve::new(grid.clone(), c.to_vec()).map(FunctionalSample::single))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let locations = locs.chunks(dim.max(1)).take(n).map(<[f64]>::to_vec).collect();
        let inner = SpatialDataset::new(samples, y.to_vec(), locations).map_err(fail)?;
        *out = Box::into_raw(Box::new(StfnnDataset {
            inner,
            features: default_features(1),
        }));
        Ok(())
    })
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_len(dataset: *const StfnnDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Responses of the dataset copied into `out` (length `len` = dataset size).
///
/// # Safety
/// `dataset` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_responses(dataset: *const StfnnDataset, out: *mut f64, len: usize) -> StfnnStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != d.inner.len() {
            return Err((StfnnStatus::Invalid, format!("buffer of {len} for {} samples", d.inner.len())));
        }
        ptr::copy_nonoverlapping(d.inner.responses().as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stfnn_dataset_free(dataset: *mut StfnnDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

unsafe fn resolve_spec(
    dataset: &SpatialDataset,
    estimator: *const c_char,
    bandwidth: f64,
    seed: u64,
) -> Result<EstimatorSpec, (StfnnStatus, String)> {
    let mut spec = EstimatorSpec::from_label(text(estimator, "estimator")?).map_err(fail)?;
    spec.train.seed = seed;
    if spec.kernel_family.is_some() {
        if bandwidth.is_nan() {
            let grid = default_bandwidth_grid(dataset.locations(), spec.kernel_family.unwrap()).map_err(fail)?;
            let chosen = select_bandwidth(dataset, &spec, &grid, 5.min(dataset.len()), seed).map_err(fail)?;
            spec = spec.with_bandwidth(chosen.bandwidth).map_err(fail)?;
        } else {
            spec = spec.with_bandwidth(bandwidth).map_err(fail)?;
        }
    }
    Ok(spec)
}

/// Fit an estimator given by label (`FLM`, `FNN_SP`, `GWFNN_Gaussian`,
/// `SARFNN_Nearest`, ...). A NaN `bandwidth` selects it by 5-fold CV;
/// it is ignored by estimators without a kernel.
///
/// # Safety
/// `dataset` must be a live handle, `estimator` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_fit(
    dataset: *const StfnnDataset,
    estimator: *const c_char,
    bandwidth: f64,
    seed: u64,
    out: *mut *mut StfnnModel,
) -> StfnnStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = resolve_spec(&d.inner, estimator, bandwidth, seed)?;
        let inner = TrainedModel::fit(&d.inner, &spec).map_err(fail)?;
        *out = Box::into_raw(Box::new(StfnnModel {
            inner,
            features: d.features.clone(),
        }));
        Ok(())
    })
}

/// Bandwidth of a kernel model, NaN otherwise.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_bandwidth(model: *const StfnnModel) -> f64 {
    model
        .as_ref()
        .and_then(|m| m.inner.spec().bandwidth)
        .unwrap_or(f64::NAN)
}

/// Predict from one single-feature curve of `len` values on the model's
/// grid, observed at `location` (`dim` coordinates). Training locations use
/// the in-sample predictor, other locations the out-of-sample one.
///
/// # Safety
/// `values` must hold `len` doubles, `location` `dim` doubles and `out` one.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_predict(
    model: *const StfnnModel,
    values: *const f64,
    len: usize,
    location: *const f64,
    dim: usize,
    out: *mut f64,
) -> StfnnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let features = m.inner.encoder().features();
        if features.len() != 1 {
            return Err((StfnnStatus::Invalid, "model has several features; use stfnn_model_predict_dataset".into()));
        }
        let grid = features[0].basis.grid().clone();
        let curve = Curve::new(grid, slice(values, len, "values")?.to_vec()).map_err(fail)?;
        let loc = slice(location, dim, "location")?;
        *out = m.inner.predict(&FunctionalSample::single(curve), loc).map_err(fail)?;
        Ok(())
    })
}

/// Predictions for every sample of `dataset`, written to `out` (length `len`).
///
/// # Safety
/// Handles must be live and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_predict_dataset(
    model: *const StfnnModel,
    dataset: *const StfnnDataset,
    out: *mut f64,
    len: usize,
) -> StfnnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != d.inner.len() {
            return Err((StfnnStatus::Invalid, format!("buffer of {len} for {} samples", d.inner.len())));
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for (i, o) in out.iter_mut().enumerate() {
            *o = m
                .inner
                .predict(&d.inner.samples()[i], &d.inner.locations()[i])
                .map_err(fail)?;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_save(model: *const StfnnModel, path: *const c_char) -> StfnnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        save_model(Path::new(text(path, "path")?), &m.inner, &m.features).map_err(fail)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_load(path: *const c_char, out: *mut *mut StfnnModel) -> StfnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let file = load_model(Path::new(text(path, "path")?)).map_err(fail)?;
        *out = Box::into_raw(Box::new(StfnnModel {
            inner: file.model,
            features: file.features,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stfnn_model_free(model: *mut StfnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Mean fold RMSE of seeded `folds`-fold CV. A NaN `bandwidth` selects it
/// by inner CV within every training fold.
///
/// # Safety
/// `dataset` must be a live handle, `estimator` a NUL-terminated string and
/// `out_rmse` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stfnn_kfold_rmse(
    dataset: *const StfnnDataset,
    estimator: *const c_char,
    bandwidth: f64,
    folds: usize,
    seed: u64,
    out_rmse: *mut f64,
) -> StfnnStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out_rmse.is_null() {
            return Err(null("out_rmse"));
        }
        let mut spec = EstimatorSpec::from_label(text(estimator, "estimator")?).map_err(fail)?;
        spec.train.seed = seed;
        if spec.kernel_family.is_some() && !bandwidth.is_nan() {
            spec = spec.with_bandwidth(bandwidth).map_err(fail)?;
        }
        let options = CvOptions {
            folds,
            seed,
            ..CvOptions::default()
        };
        *out_rmse = kfold_cv(&d.inner, &spec, &options).map_err(fail)?.rmse;
        Ok(())
    })
}
