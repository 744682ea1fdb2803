//! C ABI over `diss`. Handles are opaque pointers owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`DissStatus`]; the message for the last failure on the calling thread
//! is available from [`diss_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use diss::cli::{run_config, RunOptions};
use diss::config::ExperimentConfig;
use diss::domain::{Action, DecisionOutput, Mask, RewardSpec};
use diss::DissError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    InvalidArgument = 5,
    Runtime = 6,
    Panic = 7,
}

/// Parsed experiment configuration.
pub struct DissConfig {
    config: ExperimentConfig,
    base_dir: PathBuf,
    output_dir: Option<PathBuf>,
}

/// Curve table produced by [`diss_config_run`].
pub struct DissRun {
    rows: Vec<diss::runner::CurveRow>,
    strategies: Vec<CString>,
    output_dir: CString,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DissCurvePoint {
    pub seed: u64,
    pub queries: u64,
    pub mean_reward: f64,
    pub mean_nfeat: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &DissError) -> DissStatus {
    match err {
        DissError::InvalidConfig { .. } => DissStatus::InvalidConfig,
        DissError::Io { .. } => DissStatus::Io,
        _ => DissStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DissStatus>) -> DissStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DissStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DissStatus::Panic
        }
    }
}

fn fail(err: DissError) -> DissStatus {
    set_error(err.to_string());
    status_of(&err)
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, DissStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(DissStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        DissStatus::InvalidUtf8
    })
}

fn null_out<T>(out: *mut T, what: &str) -> Result<(), DissStatus> {
    if out.is_null() {
        set_error(format!("{what} is null"));
        Err(DissStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn diss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn diss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn diss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses TOML text. Relative paths resolve against the working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_config_from_toml(toml: *const c_char, out: *mut *mut DissConfig) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        let text = read_str(toml, "toml")?;
        let config = ExperimentConfig::from_toml(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(DissConfig { config, base_dir: PathBuf::from("."), output_dir: None }));
        Ok(())
    })
}

/// Reads and validates a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_config_from_path(path: *const c_char, out: *mut *mut DissConfig) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        let path = Path::new(read_str(path, "path")?);
        let (config, base_dir) = ExperimentConfig::load(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(DissConfig { config, base_dir, output_dir: None }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diss_config_validate(cfg: *const DissConfig) -> DissStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| {
            set_error("cfg is null");
            DissStatus::NullPointer
        })?;
        cfg.config.validate(&cfg.base_dir).map_err(fail)
    })
}

/// Resolved config as TOML; free with [`diss_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_config_to_toml(cfg: *const DissConfig, out: *mut *mut c_char) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| {
            set_error("cfg is null");
            DissStatus::NullPointer
        })?;
        let text = cfg.config.to_toml().map_err(fail)?;
        *out = CString::new(text).map_err(|_| DissStatus::Runtime)?.into_raw();
        Ok(())
    })
}

/// Overrides where [`diss_config_run`] writes its artifacts.
///
/// # Safety
/// `cfg` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn diss_config_set_output_dir(cfg: *mut DissConfig, dir: *const c_char) -> DissStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| {
            set_error("cfg is null");
            DissStatus::NullPointer
        })?;
        cfg.output_dir = Some(PathBuf::from(read_str(dir, "dir")?));
        Ok(())
    })
}

/// Runs the experiment, writing artifacts to disk, and returns the curves.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_config_run(cfg: *const DissConfig, seed_offset: u64, out: *mut *mut DissRun) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| {
            set_error("cfg is null");
            DissStatus::NullPointer
        })?;
        let opts = RunOptions { output_dir: cfg.output_dir.clone(), seed_offset };
        let summary = run_config(&cfg.config, &cfg.base_dir, &opts).map_err(fail)?;
        let strategies = summary.rows.iter().map(|r| CString::new(r.strategy.clone()).unwrap_or_default()).collect();
        let output_dir = CString::new(summary.output_dir.to_string_lossy().into_owned()).unwrap_or_default();
        *out = Box::into_raw(Box::new(DissRun { rows: summary.rows, strategies, output_dir }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn diss_config_free(cfg: *mut DissConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of curve rows, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn diss_run_len(run: *const DissRun) -> usize {
    run.as_ref().map_or(0, |r| r.rows.len())
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_run_point(run: *const DissRun, index: usize, out: *mut DissCurvePoint) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        let run = run.as_ref().ok_or_else(|| {
            set_error("run is null");
            DissStatus::NullPointer
        })?;
        let row = run.rows.get(index).ok_or_else(|| {
            set_error(format!("row {index} out of range for {} rows", run.rows.len()));
            DissStatus::InvalidArgument
        })?;
        *out = DissCurvePoint { seed: row.seed, queries: row.queries as u64, mean_reward: row.mean_reward, mean_nfeat: row.mean_nfeat };
        Ok(())
    })
}

/// Strategy label of a row; owned by the run handle. Null when out of range.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn diss_run_strategy(run: *const DissRun, index: usize) -> *const c_char {
    run.as_ref().and_then(|r| r.strategies.get(index)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Directory the artifacts were written to; owned by the run handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn diss_run_output_dir(run: *const DissRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.output_dir.as_ptr())
}

/// # Safety
/// `run` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn diss_run_free(run: *mut DissRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn read_mask(mask: *const u8, d: usize) -> Result<Mask, DissStatus> {
    if d == 0 {
        return Ok(Mask::zeros(0));
    }
    if mask.is_null() {
        set_error("mask is null");
        return Err(DissStatus::NullPointer);
    }
    let bits: Vec<bool> = std::slice::from_raw_parts(mask, d).iter().map(|&b| b != 0).collect();
    Ok(Mask::from_bools(&bits))
}

fn reward_spec(lambda: f64, epsilon: f64) -> Result<RewardSpec, DissStatus> {
    if !(lambda >= 0.0) || !(epsilon > 0.0 && epsilon < 0.5) {
        set_error("need lambda >= 0 and 0 < epsilon < 0.5");
        return Err(DissStatus::InvalidArgument);
    }
    Ok(RewardSpec::penalized(lambda).with_epsilon(epsilon))
}

/// Penalized log-likelihood reward of decision probability `eta` for label
/// `y` under a mask of `d` bytes (non-zero = shown).
///
/// # Safety
/// `mask` must point to `d` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_compute_reward(
    y: u8,
    eta: f64,
    mask: *const u8,
    d: usize,
    lambda: f64,
    epsilon: f64,
    out: *mut f64,
) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        if y > 1 || !(0.0..=1.0).contains(&eta) {
            set_error("need y in {0, 1} and eta in [0, 1]");
            return Err(DissStatus::InvalidArgument);
        }
        let spec = reward_spec(lambda, epsilon)?;
        let action = Action::new(read_mask(mask, d)?, 0);
        *out = diss::domain::compute_reward(&spec, y, &action, &DecisionOutput::new(eta));
        Ok(())
    })
}

/// p·r(1, η) + (1 − p)·r(0, η) for label probability `p`.
///
/// # Safety
/// `mask` must point to `d` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diss_expected_reward(
    p: f64,
    eta: f64,
    mask: *const u8,
    d: usize,
    lambda: f64,
    epsilon: f64,
    out: *mut f64,
) -> DissStatus {
    guard(|| {
        null_out(out, "out")?;
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&eta) {
            set_error("need p and eta in [0, 1]");
            return Err(DissStatus::InvalidArgument);
        }
        let spec = reward_spec(lambda, epsilon)?;
        *out = diss::estimators::expected_reward(&spec, p, eta, &read_mask(mask, d)?);
        Ok(())
    })
}
