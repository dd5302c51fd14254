//! C ABI over the `ratenet` core library.
//!
//! Objects are opaque heap handles created by `ratenet_config_from_json` and `ratenet_solve_limit`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`RatenetStatus`]; the message of the most recent failure on the calling thread is
//! available through [`ratenet_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ratenet::config::Config;
use ratenet::mean_field::{solve_limit_law, LimitLaw};
use ratenet::model::validate_lambda;
use ratenet::rate::{rate_h, GaussianCandidate};
use ratenet::rng::StreamSeed;
use ratenet::sampling::sample_weights;
use ratenet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatenetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Runtime = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Parsed configuration: model parameters, Λ and experiment settings.
pub struct RatenetConfig(Config);

/// Solved limit law for one configuration.
pub struct RatenetLimitLaw(LimitLaw);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> RatenetStatus {
    if err.is_validation() {
        RatenetStatus::InvalidInput
    } else {
        RatenetStatus::Runtime
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RatenetStatus, String)>) -> RatenetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RatenetStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RatenetStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RatenetStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RatenetStatus, String) {
    (RatenetStatus::NullPointer, format!("{what} is null"))
}

/// Copies the last error message (NUL-terminated, truncated to `len - 1` bytes) and
/// returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ratenet_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn ratenet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON configuration document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratenet_config_from_json(json: *const c_char, out: *mut *mut RatenetConfig) -> RatenetStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (RatenetStatus::InvalidInput, "json is not UTF-8".to_string()))?;
        let cfg = Config::from_json(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RatenetConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`ratenet_config_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ratenet_config_free(cfg: *mut RatenetConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Time horizon T of the configuration, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn ratenet_config_horizon(cfg: *const RatenetConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.params.horizon)
}

/// Validates Λ on a `grid`×`grid` frequency grid and on the DFT grids of the
/// configured sizes. Writes 1/0 to `valid` and the smallest spectrum value seen.
///
/// # Safety
/// `cfg` must be a live config handle; `valid` and `min_spectrum` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ratenet_validate_lambda(
    cfg: *const RatenetConfig,
    grid: usize,
    valid: *mut i32,
    min_spectrum: *mut f64,
) -> RatenetStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if valid.is_null() || min_spectrum.is_null() {
            return Err(null("output"));
        }
        let r = validate_lambda(&c.0.spec, grid, &c.0.experiment.n_list).map_err(lib_err)?;
        *valid = i32::from(r.valid);
        *min_spectrum = r.min_spectrum;
        Ok(())
    })
}

/// Draws an N×N weight matrix into `out` (row-major, row i = first index of J_ij,
/// indices centered from -n to n).
///
/// # Safety
/// `cfg` must be a live config handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ratenet_sample_weights(
    cfg: *const RatenetConfig,
    n: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> RatenetStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < n.saturating_mul(n) {
            return Err((RatenetStatus::BufferTooSmall, format!("need {} doubles, got {len}", n * n)));
        }
        let j = sample_weights(&c.0.spec, c.0.params.j_bar, n, StreamSeed::new(seed)).map_err(lib_err)?;
        ptr::copy_nonoverlapping(j.as_slice().as_ptr(), out, n * n);
        Ok(())
    })
}

/// Solves the limit-law recursion with the configured quadrature settings.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratenet_solve_limit(cfg: *const RatenetConfig, out: *mut *mut RatenetLimitLaw) -> RatenetStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let law = solve_limit_law(&c.0.params, &c.0.spec, &c.0.experiment.mean_field()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RatenetLimitLaw(law)));
        Ok(())
    })
}

/// # Safety
/// `law` must be null or a handle from [`ratenet_solve_limit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ratenet_limit_free(law: *mut RatenetLimitLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Copies c_e (T doubles) into `out`.
///
/// # Safety
/// `law` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ratenet_limit_mean(law: *const RatenetLimitLaw, out: *mut f64, len: usize) -> RatenetStatus {
    guard(|| {
        let l = law.as_ref().ok_or_else(|| null("law"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = l.0.c_e.as_slice();
        if len < c.len() {
            return Err((RatenetStatus::BufferTooSmall, format!("need {} doubles, got {len}", c.len())));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), out, c.len());
        Ok(())
    })
}

/// Copies the lag-`lag` block of K_e (T×T, row-major) into `out`; zero outside
/// the support radius.
///
/// # Safety
/// `law` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ratenet_limit_cov(law: *const RatenetLimitLaw, lag: i64, out: *mut f64, len: usize) -> RatenetStatus {
    guard(|| {
        let l = law.as_ref().ok_or_else(|| null("law"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = l.0.params.horizon;
        if len < t * t {
            return Err((RatenetStatus::BufferTooSmall, format!("need {} doubles, got {len}", t * t)));
        }
        let block = l.0.k_e.seq.get(lag);
        for i in 0..t {
            for j in 0..t {
                *out.add(i * t + j) = block.map_or(0.0, |b| b[(i, j)]);
            }
        }
        Ok(())
    })
}

/// Evaluates H at the limit law itself; the result should vanish up to quadrature error.
///
/// # Safety
/// `cfg` and `law` must be live handles from the same configuration; `h` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratenet_rate_at_limit(
    cfg: *const RatenetConfig,
    law: *const RatenetLimitLaw,
    h: *mut f64,
) -> RatenetStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let l = law.as_ref().ok_or_else(|| null("law"))?;
        if h.is_null() {
            return Err(null("h"));
        }
        if l.0.params != c.0.params {
            return Err((RatenetStatus::InvalidInput, "limit law was solved for other parameters".into()));
        }
        let cand = GaussianCandidate::from_limit_law(&l.0);
        let r = rate_h(&cand, &c.0.params, &c.0.spec, &c.0.experiment.rate()).map_err(lib_err)?;
        *h = r.h_value;
        Ok(())
    })
}
