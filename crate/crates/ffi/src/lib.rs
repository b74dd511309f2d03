//! C interface to rrt-core.
//!
//! Objects cross the boundary as opaque handles owned by the caller and released
//! with the matching `*_free`. Every fallible call returns an [`RrtStatus`]; the
//! message of the last failure on the calling thread is kept for
//! [`rrt_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rrt_core::cli::{equidistant_container, equidistant_from_container, tangent_container, tangent_from_container};
use rrt_core::container::Container;
use rrt_core::forward::{forward_equidistant, forward_tangent, EquidistantGrid};
use rrt_core::invert_tangent::{invert_mode, TangentInvertOptions};
use rrt_core::phantoms::Phantom;
use rrt_core::Error;

/// Status codes; the non-zero values match the command line exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrtStatus {
    Ok = 0,
    Validation = 2,
    Io = 3,
    Numeric = 4,
    NullPointer = 6,
    Panic = 7,
}

/// Phantom of any family.
pub struct RrtPhantom {
    inner: Phantom,
}

/// Forward data of the tangent or equidistant family in container form.
pub struct RrtSinogram {
    inner: Container,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RrtStatus {
    match e.exit_code() {
        2 => RrtStatus::Validation,
        3 => RrtStatus::Io,
        _ => RrtStatus::Numeric,
    }
}

fn guard<F: FnOnce() -> Result<(), (RrtStatus, String)>>(f: F) -> RrtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrtStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            RrtStatus::Panic
        }
    }
}

fn core<T>(r: rrt_core::Result<T>) -> Result<T, (RrtStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RrtStatus, String) {
    (RrtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RrtStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RrtStatus::Validation, format!("{what} is not UTF-8")))
}

/// Length in bytes of the last error message on this thread, excluding the terminator.
#[no_mangle]
pub extern "C" fn rrt_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to `len`).
/// Returns the number of bytes written excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn rrt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let b = e.borrow();
        let bytes = b.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rrt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a phantom JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_phantom_from_json(json: *const c_char, out: *mut *mut RrtPhantom) -> RrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = str_arg(json, "json")?;
        let p = core(Phantom::from_json(s))?;
        *out = Box::into_raw(Box::new(RrtPhantom { inner: p }));
        Ok(())
    })
}

/// Serializes a phantom to JSON; release the string with [`rrt_string_free`].
///
/// # Safety
/// `phantom` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_phantom_to_json(phantom: *const RrtPhantom, out: *mut *mut c_char) -> RrtStatus {
    guard(|| {
        let p = phantom.as_ref().ok_or_else(|| null("phantom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = core(p.inner.to_json())?;
        *out = CString::new(s).map_err(|_| (RrtStatus::Validation, "JSON holds NUL".into()))?.into_raw();
        Ok(())
    })
}

/// 0 tangent, 1 equidistant, 2 pencil, -1 for a null handle.
///
/// # Safety
/// `phantom` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rrt_phantom_family(phantom: *const RrtPhantom) -> i32 {
    match phantom.as_ref().map(|p| &p.inner) {
        Some(Phantom::Tangent(_)) => 0,
        Some(Phantom::Equidistant(_)) => 1,
        Some(Phantom::Pencil(_)) => 2,
        None => -1,
    }
}

/// Evaluates the phantom at `x` (length `dim`: 3 for tangent and equidistant).
///
/// # Safety
/// `x` must point to `dim` doubles; `re`, `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_phantom_eval(
    phantom: *const RrtPhantom,
    x: *const f64,
    dim: usize,
    re: *mut f64,
    im: *mut f64,
) -> RrtStatus {
    guard(|| {
        let p = phantom.as_ref().ok_or_else(|| null("phantom"))?;
        if x.is_null() || re.is_null() || im.is_null() {
            return Err(null("argument"));
        }
        let want = match &p.inner {
            Phantom::Pencil(q) => q.dim,
            _ => 3,
        };
        if dim != want {
            return Err((RrtStatus::Validation, format!("point must have {want} coordinates")));
        }
        let xs = std::slice::from_raw_parts(x, dim);
        let (a, b) = match &p.inner {
            Phantom::Tangent(t) => {
                let z = t.eval([xs[0], xs[1], xs[2]]);
                (z.re, z.im)
            }
            Phantom::Equidistant(e) => {
                let z = e.eval([xs[0], xs[1], xs[2]]);
                (z.re, z.im)
            }
            Phantom::Pencil(q) => (q.eval(xs), 0.0),
        };
        *re = a;
        *im = b;
        Ok(())
    })
}
/// Releases a phantom handle.
///
/// # Safety
/// `phantom` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rrt_phantom_free(phantom: *mut RrtPhantom) {
    if !phantom.is_null() {
        drop(Box::from_raw(phantom));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rrt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Tangent data on the Haar nodes of band limit `band_limit` at the given λ ≥ 1.
///
/// # Safety
/// `lambdas` must point to `n_lambda` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_forward_tangent(
    phantom: *const RrtPhantom,
    lambdas: *const f64,
    n_lambda: usize,
    band_limit: usize,
    out: *mut *mut RrtSinogram,
) -> RrtStatus {
    guard(|| {
        let p = phantom.as_ref().ok_or_else(|| null("phantom"))?;
        if lambdas.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let Phantom::Tangent(t) = &p.inner else {
            return Err((RrtStatus::Validation, "phantom is not of the tangent family".into()));
        };
        let ls = std::slice::from_raw_parts(lambdas, n_lambda);
        let s = core(forward_tangent(t, ls, band_limit))?;
        let mut c = core(tangent_container(&s))?;
        c.header.phantom_hash = Some(p.inner.hash());
        *out = Box::into_raw(Box::new(RrtSinogram { inner: c }));
        Ok(())
    })
}

/// Equidistant data on the standard geometric grid; `lambda_max <= 0` uses the
/// radial support bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_forward_equidistant(
    phantom: *const RrtPhantom,
    n_lambda: usize,
    n_s: usize,
    n_phi: usize,
    lambda_max: f64,
    out: *mut *mut RrtSinogram,
) -> RrtStatus {
    guard(|| {
        let p = phantom.as_ref().ok_or_else(|| null("phantom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let Phantom::Equidistant(e) = &p.inner else {
            return Err((RrtStatus::Validation, "phantom is not of the equidistant family".into()));
        };
        let b = e.support_box();
        let lm = if lambda_max > 0.0 { lambda_max } else { b.r_max };
        let grid = EquidistantGrid::standard(lm, n_lambda, n_s, n_phi);
        let s = core(forward_equidistant(e, &grid))?;
        let mut c = core(equidistant_container(&s, &b))?;
        c.header.phantom_hash = Some(p.inner.hash());
        *out = Box::into_raw(Box::new(RrtSinogram { inner: c }));
        Ok(())
    })
}

/// Number of complex samples held by the sinogram, 0 for a null handle.
///
/// # Safety
/// `sino` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rrt_sinogram_len(sino: *const RrtSinogram) -> usize {
    sino.as_ref().map_or(0, |s| s.inner.header.element_count())
}

/// Copies the samples as interleaved (re, im) pairs into `out` of `cap` doubles.
///
/// # Safety
/// `out` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rrt_sinogram_values(sino: *const RrtSinogram, out: *mut f64, cap: usize) -> RrtStatus {
    guard(|| {
        let s = sino.as_ref().ok_or_else(|| null("sinogram"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let words = &s.inner.payload;
        if cap < words.len() {
            return Err((RrtStatus::Validation, format!("buffer holds {cap} doubles, need {}", words.len())));
        }
        ptr::copy_nonoverlapping(words.as_ptr(), out, words.len());
        Ok(())
    })
}

/// Writes the sinogram container to `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rrt_sinogram_write(sino: *const RrtSinogram, path: *const c_char) -> RrtStatus {
    guard(|| {
        let s = sino.as_ref().ok_or_else(|| null("sinogram"))?;
        let p = str_arg(path, "path")?;
        core(s.inner.write(Path::new(p)))
    })
}

/// Reads a tangent or equidistant sinogram container from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_sinogram_read(path: *const c_char, out: *mut *mut RrtSinogram) -> RrtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = str_arg(path, "path")?;
        let c = core(Container::read(Path::new(p)))?;
        match c.header.kind.as_str() {
            "tangent_sinogram" => {
                core(tangent_from_container(&c))?;
            }
            "equidistant_sinogram" => {
                core(equidistant_from_container(&c))?;
            }
            other => return Err((RrtStatus::Validation, format!("container holds `{other}`, not a sinogram"))),
        }
        *out = Box::into_raw(Box::new(RrtSinogram { inner: c }));
        Ok(())
    })
}

/// Releases a sinogram handle.
///
/// # Safety
/// `sino` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rrt_sinogram_free(sino: *mut RrtSinogram) {
    if !sino.is_null() {
        drop(Box::from_raw(sino));
    }
}

/// Recovers the window coefficients of mode (m, k) from tangent data.
/// Writes up to `cap` indices and interleaved coefficient pairs; `count` receives
/// the number of coefficients available.
///
/// # Safety
/// `indices` must hold `cap` int64 and `coeffs` `2 * cap` doubles; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_invert_tangent_mode(
    sino: *const RrtSinogram,
    m: usize,
    k: i64,
    indices: *mut i64,
    coeffs: *mut f64,
    cap: usize,
    count: *mut usize,
) -> RrtStatus {
    guard(|| {
        let s = sino.as_ref().ok_or_else(|| null("sinogram"))?;
        if count.is_null() || (cap > 0 && (indices.is_null() || coeffs.is_null())) {
            return Err(null("argument"));
        }
        let t = core(tangent_from_container(&s.inner))?;
        let inv = core(invert_mode(&t, m, k, &TangentInvertOptions::default()))?;
        let wc = inv.record.window_coefficients();
        *count = wc.len();
        for (i, (n, c)) in wc.iter().take(cap).enumerate() {
            *indices.add(i) = *n;
            *coeffs.add(2 * i) = c.re;
            *coeffs.add(2 * i + 1) = c.im;
        }
        Ok(())
    })
}

/// Runs a self-test suite; `passed` receives 1 when every check passes.
///
/// # Safety
/// `suite` must be a NUL-terminated string; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrt_selftest(suite: *const c_char, passed: *mut i32) -> RrtStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        let name = str_arg(suite, "suite")?;
        let r = core(rrt_core::selftest::run_suite(name, 7))?;
        *passed = r.pass as i32;
        Ok(())
    })
}
