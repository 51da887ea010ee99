//! C ABI over `bmlab`.
//!
//! Objects cross the boundary as opaque handles created by `bm_*_new`-style
//! constructors and released with the matching `bm_*_free`. Every fallible
//! call returns a [`BmStatus`]; on failure a message is kept per thread and
//! can be read with [`bm_last_error`]. Strings returned by the library are
//! released with [`bm_string_free`].
//!
//! Matrices are row-major. Complex matrices are interleaved `re, im` pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bmlab::bmdist::{bm_exact_2d, bm_upper};
use bmlab::bounds::lower_chain;
use bmlab::harness::{preset, run_experiment, verify_report_value, ExperimentConfig};
use bmlab::linalg::to_interleaved;
use bmlab::qexpander::{haar_tuple, overlap_norm, separated_family, SeparatedUnitaryFamily, UnitaryTuple};
use bmlab::signset::{exact_sign_tail, greedy_sign_set, hoeffding_tail, SignSet, SignSetMode};
use bmlab::spaces::{make_ex, PolytopalSpace};
use bmlab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    ResourceGuard = 3,
    ConstructionFailed = 4,
    Unsupported = 5,
    NonConvergence = 6,
    Validation = 7,
    Io = 8,
    Json = 9,
    NullPointer = 10,
    Utf8 = 11,
    Panic = 12,
}

/// Sign set handle.
pub struct BmSignSet(SignSet);
/// Normed space handle.
pub struct BmSpace(PolytopalSpace);
/// Unitary tuple handle.
pub struct BmTuple(UnitaryTuple);
/// Separated unitary family handle.
pub struct BmFamily(SeparatedUnitaryFamily);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::Lib(Error::Json(e))
    }
}

fn status_of(e: &Error) -> BmStatus {
    match e {
        Error::InvalidArgument(_) => BmStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => BmStatus::DimensionMismatch,
        Error::ResourceGuard(_) => BmStatus::ResourceGuard,
        Error::ConstructionFailed(_) => BmStatus::ConstructionFailed,
        Error::Unsupported(_) => BmStatus::Unsupported,
        Error::NonConvergence(_) => BmStatus::NonConvergence,
        Error::Validation(_) => BmStatus::Validation,
        Error::Io(_) => BmStatus::Io,
        Error::Json(_) => BmStatus::Json,
        Error::Csv(_) => BmStatus::Io,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn call<F: FnOnce() -> Result<(), Fail>>(f: F) -> BmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BmStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BmStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            BmStatus::Utf8
        }
        Err(_) => {
            set_error("internal panic".into());
            BmStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn owned_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|_| Fail::Utf8)
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn bm_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn bm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `2 exp(−θ²n/2)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_hoeffding_tail(theta: f64, n: usize, out: *mut f64) -> BmStatus {
    call(|| put(out, hoeffding_tail(theta, n)?, "out"))
}

/// Exact `P{|Σ ωⱼ| > θn}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_exact_sign_tail(n: usize, theta: f64, out: *mut f64) -> BmStatus {
    call(|| put(out, exact_sign_tail(n, theta)?.probability, "out"))
}

/// Greedy θ-separated sign set: exhaustive when `samples` is 0, otherwise
/// over `samples` seeded candidates.
///
/// # Safety
/// `out` must be writable; the handle is released with [`bm_signset_free`].
#[no_mangle]
pub unsafe extern "C" fn bm_signset_greedy(
    n: usize,
    theta: f64,
    samples: usize,
    seed: u64,
    out: *mut *mut BmSignSet,
) -> BmStatus {
    call(|| {
        let mode = if samples == 0 { SignSetMode::Exhaustive } else { SignSetMode::Sampled { count: samples } };
        let set = greedy_sign_set(n, theta, mode, seed)?;
        put(out, boxed(BmSignSet(set)), "out")
    })
}

/// # Safety
/// `set` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_signset_len(set: *const BmSignSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `set` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_signset_dim(set: *const BmSignSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.n)
}

/// Largest `|⟨s, t⟩|` over distinct members.
///
/// # Safety
/// `set` is a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_signset_max_correlation(set: *const BmSignSet, out: *mut i64) -> BmStatus {
    call(|| put(out, get(set, "set")?.0.max_correlation(), "out"))
}

/// Copies member `index` into `out[0..len]`; `len` must equal the dimension.
///
/// # Safety
/// `set` is a live handle and `out` has room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn bm_signset_vector(set: *const BmSignSet, index: usize, out: *mut i8, len: usize) -> BmStatus {
    call(|| {
        let s = &get(set, "set")?.0;
        let v = s.vectors.get(index).ok_or_else(|| Error::InvalidArgument(format!("index {index} out of range")))?;
        if len != v.len() {
            return Err(Error::DimensionMismatch { expected: v.len(), got: len }.into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `set` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_signset_free(set: *mut BmSignSet) {
    free(set)
}

unsafe fn put_space(out: *mut *mut BmSpace, s: PolytopalSpace) -> Result<(), Fail> {
    put(out, boxed(BmSpace(s)), "out")
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_linf(dim: usize, out: *mut *mut BmSpace) -> BmStatus {
    call(|| {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()).into());
        }
        put_space(out, PolytopalSpace::l_inf(dim))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_l1(dim: usize, out: *mut *mut BmSpace) -> BmStatus {
    call(|| put_space(out, PolytopalSpace::l_1(dim)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_l2(dim: usize, out: *mut *mut BmSpace) -> BmStatus {
    call(|| {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()).into());
        }
        put_space(out, PolytopalSpace::l_2(dim))
    })
}

/// Norm `max_k |⟨f_k, a⟩|` over `count` functionals stored row-major in
/// `functionals` (`count * dim` values).
///
/// # Safety
/// `functionals` holds `count * dim` readable values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_polytopal(
    dim: usize,
    functionals: *const f64,
    count: usize,
    out: *mut *mut BmSpace,
) -> BmStatus {
    call(|| {
        let flat = slice(functionals, dim * count, "functionals")?;
        let rows = if dim == 0 { Vec::new() } else { flat.chunks(dim).map(<[f64]>::to_vec).collect() };
        put_space(out, PolytopalSpace::polytopal(dim, rows, "polytopal")?)
    })
}

/// `E_x` for the members of `set` listed in `x`.
///
/// # Safety
/// `set` is a live handle, `x` holds `len` readable indices, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_make_ex(
    set: *const BmSignSet,
    x: *const usize,
    len: usize,
    out: *mut *mut BmSpace,
) -> BmStatus {
    call(|| {
        let s = &get(set, "set")?.0;
        put_space(out, make_ex(s, slice(x, len, "x")?)?)
    })
}

/// # Safety
/// `space` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_space_dim(space: *const BmSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `space` is a live handle, `a` holds `len` values, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bm_space_norm(space: *const BmSpace, a: *const f64, len: usize, out: *mut f64) -> BmStatus {
    call(|| {
        let s = &get(space, "space")?.0;
        put(out, s.norm(slice(a, len, "a")?)?, "out")
    })
}

/// # Safety
/// `space` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_space_free(space: *mut BmSpace) {
    free(space)
}

/// Two-dimensional distance oracle: `lower ≤ d(E, F) ≤ value`. When `map`
/// is not NULL it receives the 2×2 map attaining `value`, row-major.
///
/// # Safety
/// Handles are live, `value` and `lower` writable, `map` NULL or room for 4.
#[no_mangle]
pub unsafe extern "C" fn bm_distance_exact_2d(
    e: *const BmSpace,
    f: *const BmSpace,
    tol: f64,
    value: *mut f64,
    lower: *mut f64,
    map: *mut f64,
) -> BmStatus {
    call(|| {
        let r = bm_exact_2d(&get(e, "e")?.0, &get(f, "f")?.0, tol)?;
        put(value, r.value, "value")?;
        put(lower, r.lower, "lower")?;
        if !map.is_null() {
            for (k, v) in r.map.iter().flatten().take(4).enumerate() {
                map.add(k).write(*v);
            }
        }
        Ok(())
    })
}

/// Certified upper bound on `d(E, F)` from John positions and local search.
///
/// # Safety
/// Handles are live and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_distance_upper(
    e: *const BmSpace,
    f: *const BmSpace,
    effort: usize,
    seed: u64,
    value: *mut f64,
) -> BmStatus {
    call(|| put(value, bm_upper(&get(e, "e")?.0, &get(f, "f")?.0, effort, seed)?.value, "value"))
}

/// Haar-random tuple of `n` unitaries of size `big_n`.
///
/// # Safety
/// `out` must be writable; release with [`bm_tuple_free`].
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_haar(n: usize, big_n: usize, seed: u64, out: *mut *mut BmTuple) -> BmStatus {
    call(|| put(out, boxed(BmTuple(haar_tuple(n, big_n, seed)?)), "out"))
}

/// # Safety
/// `t` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_n(t: *const BmTuple) -> usize {
    t.as_ref().map_or(0, |t| t.0.n())
}

/// # Safety
/// `t` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_big_n(t: *const BmTuple) -> usize {
    t.as_ref().map_or(0, |t| t.0.big_n())
}

/// Expander defect in `[0, 1]`; `flagged` (may be NULL) reports whether the
/// two power-iteration starts disagreed.
///
/// # Safety
/// `t` is live, `out` writable, `flagged` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_defect(t: *const BmTuple, out: *mut f64, flagged: *mut bool) -> BmStatus {
    call(|| {
        let t = &get(t, "tuple")?.0;
        if !flagged.is_null() {
            flagged.write(t.defect_flagged());
        }
        put(out, t.defect(), "out")
    })
}

/// `‖Σ sⱼ ⊗ t̄ⱼ‖`.
///
/// # Safety
/// Handles are live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_overlap(s: *const BmTuple, t: *const BmTuple, out: *mut f64) -> BmStatus {
    call(|| put(out, overlap_norm(&get(s, "s")?.0, &get(t, "t")?.0)?, "out"))
}

/// Copies unitary `j` as `2·N²` interleaved values.
///
/// # Safety
/// `t` is live and `out` has room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_matrix(t: *const BmTuple, j: usize, out: *mut f64, len: usize) -> BmStatus {
    call(|| {
        let t = &get(t, "tuple")?.0;
        let m = t.matrices().get(j).ok_or_else(|| Error::InvalidArgument(format!("index {j} out of range")))?;
        let data = to_interleaved(m);
        if len != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: len }.into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `t` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_tuple_free(t: *mut BmTuple) {
    free(t)
}

/// Greedy δ-separated family of tuples with defect at most ε.
///
/// # Safety
/// `out` must be writable; release with [`bm_family_free`].
#[no_mangle]
pub unsafe extern "C" fn bm_family_sample(
    n: usize,
    big_n: usize,
    epsilon: f64,
    delta: f64,
    max_samples: usize,
    seed: u64,
    out: *mut *mut BmFamily,
) -> BmStatus {
    call(|| put(out, boxed(BmFamily(separated_family(n, big_n, epsilon, delta, max_samples, seed)?)), "out"))
}

/// # Safety
/// `fam` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bm_family_len(fam: *const BmFamily) -> usize {
    fam.as_ref().map_or(0, |f| f.0.len())
}

/// New tuple handle holding a copy of member `index`.
///
/// # Safety
/// `fam` is live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_family_member(fam: *const BmFamily, index: usize, out: *mut *mut BmTuple) -> BmStatus {
    call(|| {
        let f = &get(fam, "family")?.0;
        let m = f.members.get(index).ok_or_else(|| Error::InvalidArgument(format!("index {index} out of range")))?;
        put(out, boxed(BmTuple(m.clone())), "out")
    })
}

/// Recomputes defects and overlaps and checks membership and separation.
///
/// # Safety
/// `fam` is live and `ok` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_family_verify(fam: *const BmFamily, ok: *mut bool) -> BmStatus {
    call(|| put(ok, get(fam, "family")?.0.verify()?.ok, "ok"))
}

/// # Safety
/// `fam` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_family_free(fam: *mut BmFamily) {
    free(fam)
}

/// Whether the packing lower bound at `(n, θ, r)` reaches its target;
/// `ln_log_packing` (may be NULL) receives the log of the log packing bound.
///
/// # Safety
/// `passes` writable, `ln_log_packing` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bm_lower_chain(
    n: u64,
    theta: f64,
    r: f64,
    passes: *mut bool,
    ln_log_packing: *mut f64,
) -> BmStatus {
    call(|| {
        let c = lower_chain(n, theta, r)?;
        if !ln_log_packing.is_null() {
            ln_log_packing.write(c.log_packing.ln_f64()?);
        }
        put(passes, c.passes, "passes")
    })
}

/// Runs an experiment config given as JSON and returns the report as JSON.
///
/// # Safety
/// `config_json` is a NUL-terminated string; `report_json` and `all_passed`
/// are writable. Release the report with [`bm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn bm_run_config_json(
    config_json: *const c_char,
    report_json: *mut *mut c_char,
    all_passed: *mut bool,
) -> BmStatus {
    call(|| {
        let cfg: ExperimentConfig = serde_json::from_str(string(config_json, "config_json")?)
            .map_err(|e| Error::Validation(format!("config does not parse: {e}")))?;
        let outcome = run_experiment(&cfg)?;
        put(all_passed, outcome.report.all_passed, "all_passed")?;
        put(report_json, owned_string(serde_json::to_string(&outcome.report)?)?, "report_json")
    })
}

/// Re-checks every certificate of a JSON report; failures are described by
/// [`bm_last_error`] even though the call itself succeeds.
///
/// # Safety
/// `report_json` is a NUL-terminated string and `ok` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_verify_report_json(report_json: *const c_char, ok: *mut bool) -> BmStatus {
    call(|| {
        let value: serde_json::Value = serde_json::from_str(string(report_json, "report_json")?)?;
        let v = verify_report_value(&value)?;
        if !v.ok {
            set_error(v.failures.join("; "));
        }
        put(ok, v.ok, "ok")
    })
}

/// Built-in config `name` as JSON.
///
/// # Safety
/// `name` is a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bm_preset_json(name: *const c_char, out: *mut *mut c_char) -> BmStatus {
    call(|| {
        let cfg = preset(string(name, "name")?)?;
        put(out, owned_string(serde_json::to_string(&cfg)?)?, "out")
    })
}
