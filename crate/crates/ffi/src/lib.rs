//! C ABI over `robvar`.
//!
//! Objects are opaque heap handles created by `robvar_*_new`/producer
//! functions and released with the matching `robvar_*_free`. Every fallible
//! call returns a [`RobvarStatus`]; on failure a description is available
//! from [`robvar_last_error`] on the same thread. Matrices cross the
//! boundary as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robvar::simulate::{simulate_retrying, DgpSpec, NoiseSpec};
use robvar::{
    estimation_error, fit_var, huber_value, Error, FitConfig, LambdaMode, OptimizerConfig, RobustConfig,
    StepRule, TimeSeriesMatrix, VarFit, VarModel,
};
use robvar::nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobvarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Unstable = 4,
    Numerical = 5,
    Explosive = 6,
    Io = 7,
    Parse = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for RobvarStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Column { source, .. } => RobvarStatus::from(source.as_ref()),
            Error::Domain(_) | Error::Config(_) | Error::Empty(_) | Error::Generation(_) => {
                RobvarStatus::InvalidArgument
            }
            Error::Dimension(_) => RobvarStatus::Dimension,
            Error::Unstable { .. } => RobvarStatus::Unstable,
            Error::EigenNoConvergence { .. } | Error::ZeroRadius | Error::Divergence { .. } => {
                RobvarStatus::Numerical
            }
            Error::Explosive { .. } => RobvarStatus::Explosive,
            Error::Io { .. } => RobvarStatus::Io,
            Error::Parse(_) => RobvarStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobvarLambdaMode {
    /// `lambda_param` is the penalty level itself.
    Explicit = 0,
    /// `lambda_param` is the rate constant `c`.
    Theory = 1,
}

/// Settings for [`robvar_fit_var`]; start from [`robvar_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RobvarFitOptions {
    pub lag: usize,
    pub tau: f64,
    pub b: f64,
    pub lambda_mode: RobvarLambdaMode,
    pub lambda_param: f64,
    /// Fixed step size; zero or negative selects `0.99 / L`.
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// Observation matrix (rows are time points).
pub struct RobvarSeries(TimeSeriesMatrix);
/// VAR coefficient matrices.
pub struct RobvarModel(VarModel);
/// Result of a VAR fit.
pub struct RobvarFit(VarFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RobvarStatus, msg: impl Into<String>) -> RobvarStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), RobvarStatus>) -> RobvarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RobvarStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(RobvarStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: robvar::Result<T>) -> Result<T, RobvarStatus> {
    r.map_err(|e| fail(RobvarStatus::from(&e), e.to_string()))
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), RobvarStatus> {
    if p.is_null() {
        Err(fail(RobvarStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn robvar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn robvar_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Huber loss at `u` with threshold `tau`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn robvar_huber_value(u: f64, tau: f64, out: *mut f64) -> RobvarStatus {
    guard(|| {
        nonnull(out, "out")?;
        let v = lift(huber_value(u, tau))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Copy an `n × p` row-major buffer into a new series.
///
/// # Safety
/// `data` must point to `n * p` doubles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_series_new(
    data: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut RobvarSeries,
) -> RobvarStatus {
    guard(|| {
        nonnull(data, "data")?;
        nonnull(out, "out")?;
        let len = n
            .checked_mul(p)
            .ok_or_else(|| fail(RobvarStatus::InvalidArgument, "n * p overflows"))?;
        let slice = unsafe { std::slice::from_raw_parts(data, len) };
        let ts = lift(TimeSeriesMatrix::new(DMatrix::from_row_slice(n, p, slice)))?;
        unsafe { *out = Box::into_raw(Box::new(RobvarSeries(ts))) };
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn robvar_series_free(series: *mut RobvarSeries) {
    if !series.is_null() {
        drop(unsafe { Box::from_raw(series) });
    }
}

/// # Safety
/// `series` must be a live handle; `n` and `p` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_series_dims(series: *const RobvarSeries, n: *mut usize, p: *mut usize) -> RobvarStatus {
    guard(|| {
        nonnull(series, "series")?;
        nonnull(n, "n")?;
        nonnull(p, "p")?;
        let s = unsafe { &(*series).0 };
        unsafe {
            *n = s.n();
            *p = s.p();
        }
        Ok(())
    })
}

fn copy_row_major(m: &DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), RobvarStatus> {
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err(fail(
            RobvarStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} needed"),
        ));
    }
    let dst = unsafe { std::slice::from_raw_parts_mut(out, need) };
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

/// Copy the series into `out` (row-major, at least `n * p` values).
///
/// # Safety
/// `series` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn robvar_series_copy(series: *const RobvarSeries, out: *mut f64, len: usize) -> RobvarStatus {
    guard(|| {
        nonnull(series, "series")?;
        nonnull(out, "out")?;
        copy_row_major(unsafe { (*series).0.data() }, out, len)
    })
}

/// Build a VAR(d) model from `d` consecutive row-major `p × p` blocks
/// `B_1, …, B_d` (entry `(i, j)` of `B_k` multiplies `z_{t−k, i}` in the
/// equation for coordinate `j`).
///
/// # Safety
/// `coeffs` must point to `d * p * p` doubles; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_model_new(
    coeffs: *const f64,
    p: usize,
    d: usize,
    out: *mut *mut RobvarModel,
) -> RobvarStatus {
    guard(|| {
        nonnull(coeffs, "coeffs")?;
        nonnull(out, "out")?;
        let block = p
            .checked_mul(p)
            .and_then(|b| b.checked_mul(d).map(|_| b))
            .ok_or_else(|| fail(RobvarStatus::InvalidArgument, "p * p * d overflows"))?;
        let all = unsafe { std::slice::from_raw_parts(coeffs, block * d) };
        let mats = (0..d)
            .map(|k| DMatrix::from_row_slice(p, p, &all[k * block..(k + 1) * block]))
            .collect();
        let model = lift(VarModel::new(mats))?;
        unsafe { *out = Box::into_raw(Box::new(RobvarModel(model))) };
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn robvar_model_free(model: *mut RobvarModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be live; `p` and `d` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_model_dims(model: *const RobvarModel, p: *mut usize, d: *mut usize) -> RobvarStatus {
    guard(|| {
        nonnull(model, "model")?;
        nonnull(p, "p")?;
        nonnull(d, "d")?;
        let m = unsafe { &(*model).0 };
        unsafe {
            *p = m.p();
            *d = m.d();
        }
        Ok(())
    })
}

/// Copy the coefficient blocks into `out` in the layout of
/// [`robvar_model_new`] (`d * p * p` values).
///
/// # Safety
/// `model` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn robvar_model_coefficients(model: *const RobvarModel, out: *mut f64, len: usize) -> RobvarStatus {
    guard(|| {
        nonnull(model, "model")?;
        nonnull(out, "out")?;
        let m = unsafe { &(*model).0 };
        let block = m.p() * m.p();
        let need = block * m.d();
        if len < need {
            return Err(fail(
                RobvarStatus::BufferTooSmall,
                format!("buffer holds {len} values, {need} needed"),
            ));
        }
        for (k, b) in m.coeffs().iter().enumerate() {
            copy_row_major(b, unsafe { out.add(k * block) }, block)?;
        }
        Ok(())
    })
}

/// Spectral radius of the companion matrix.
///
/// # Safety
/// `model` must be live; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_model_radius(model: *const RobvarModel, out: *mut f64) -> RobvarStatus {
    guard(|| {
        nonnull(model, "model")?;
        nonnull(out, "out")?;
        let r = lift(unsafe { &(*model).0 }.radius())?;
        unsafe { *out = r };
        Ok(())
    })
}

/// Simulate `n` rows of the VAR with iid Student-t(`df`) noise after
/// `burn_in` discarded steps, retrying explosive paths up to 10 times.
///
/// # Safety
/// `model` must be live; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_simulate_var_t(
    model: *const RobvarModel,
    df: f64,
    n: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut RobvarSeries,
) -> RobvarStatus {
    guard(|| {
        nonnull(model, "model")?;
        nonnull(out, "out")?;
        let m = unsafe { &(*model).0 }.clone();
        let spec = lift(NoiseSpec::student_t(df).and_then(|noise| DgpSpec::var_t(m, noise)))?;
        let (ts, _) = lift(simulate_retrying(&spec, n, burn_in, seed, 10))?;
        unsafe { *out = Box::into_raw(Box::new(RobvarSeries(ts))) };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn robvar_fit_options_default() -> RobvarFitOptions {
    let opt = OptimizerConfig::default();
    RobvarFitOptions {
        lag: 1,
        tau: 1.0,
        b: 3.0,
        lambda_mode: RobvarLambdaMode::Theory,
        lambda_param: robvar::diagnostics::CALIBRATED_C,
        step: match opt.step {
            StepRule::Fixed(s) => s,
            StepRule::Safe => 0.0,
        },
        tol: opt.tol,
        max_iter: opt.max_iter,
        seed: 0,
    }
}

/// Fit a robust sparse VAR to `series`.
///
/// # Safety
/// `series` must be live; `options` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn robvar_fit_var(
    series: *const RobvarSeries,
    options: *const RobvarFitOptions,
    out: *mut *mut RobvarFit,
) -> RobvarStatus {
    guard(|| {
        nonnull(series, "series")?;
        nonnull(options, "options")?;
        nonnull(out, "out")?;
        let o = unsafe { *options };
        let lambda = match o.lambda_mode {
            RobvarLambdaMode::Explicit => LambdaMode::Explicit(o.lambda_param),
            RobvarLambdaMode::Theory => LambdaMode::Theory(o.lambda_param),
        };
        let robust = lift(RobustConfig::new(o.tau, o.b))?;
        let cfg = FitConfig {
            opt: OptimizerConfig {
                step: if o.step > 0.0 { StepRule::Fixed(o.step) } else { StepRule::Safe },
                tol: o.tol,
                max_iter: o.max_iter,
                seed: o.seed,
                record_trace: false,
            },
            ..FitConfig::new(robust, lambda)
        };
        let fit = lift(fit_var(unsafe { &(*series).0 }, o.lag, &cfg))?;
        unsafe { *out = Box::into_raw(Box::new(RobvarFit(fit))) };
        Ok(())
    })
}

/// # Safety
/// `fit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn robvar_fit_free(fit: *mut RobvarFit) {
    if !fit.is_null() {
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Penalty level used, whether every column converged, and the largest
/// iteration count. Any output pointer may be NULL.
///
/// # Safety
/// `fit` must be live; non-NULL outputs must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_fit_summary(
    fit: *const RobvarFit,
    lambda: *mut f64,
    converged: *mut bool,
    max_iterations: *mut usize,
) -> RobvarStatus {
    guard(|| {
        nonnull(fit, "fit")?;
        let f = unsafe { &(*fit).0 };
        unsafe {
            if !lambda.is_null() {
                *lambda = f.lambda;
            }
            if !converged.is_null() {
                *converged = f.all_converged();
            }
            if !max_iterations.is_null() {
                *max_iterations = f.max_iterations();
            }
        }
        Ok(())
    })
}

/// New model handle holding the estimated coefficients.
///
/// # Safety
/// `fit` must be live; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_fit_model(fit: *const RobvarFit, out: *mut *mut RobvarModel) -> RobvarStatus {
    guard(|| {
        nonnull(fit, "fit")?;
        nonnull(out, "out")?;
        let m = unsafe { &(*fit).0 }.model.clone();
        unsafe { *out = Box::into_raw(Box::new(RobvarModel(m))) };
        Ok(())
    })
}

/// `max_j ||â_j − a_j||` over stacked coefficient columns.
///
/// # Safety
/// Both models must be live; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn robvar_estimation_error(
    estimate: *const RobvarModel,
    truth: *const RobvarModel,
    out: *mut f64,
) -> RobvarStatus {
    guard(|| {
        nonnull(estimate, "estimate")?;
        nonnull(truth, "truth")?;
        nonnull(out, "out")?;
        let e = lift(estimation_error(unsafe { &(*estimate).0 }, unsafe { &(*truth).0 }))?;
        unsafe { *out = e };
        Ok(())
    })
}
