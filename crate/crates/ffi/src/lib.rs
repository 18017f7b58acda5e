//! C interface to `invmean`.
//!
//! Objects are opaque handles created by `*_new`/`*_from_json` and released
//! with the matching `*_free`. Every fallible call returns an [`ImStatus`];
//! on failure a description is available from [`im_last_error`] until the
//! next call on the same thread. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use invmean::separation::{contraction_bound, separation};
use invmean::{
    apply_family, compute_invariant, power_mean, qa_mean, AdmissibleFamily, Discretization, Error,
    Generator, GeneratorKind, Interval, IterationOptions, Measure, Status,
};

/// Opaque probability measure.
pub struct ImMeasure(Measure);

/// Opaque generator bound to its domain.
pub struct ImGenerator(Generator);

/// Opaque admissible family.
pub struct ImFamily(AdmissibleFamily);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    InvalidMeasure = 4,
    InvalidGenerator = 5,
    InvalidFamily = 6,
    DomainError = 7,
    ConvergenceFailure = 8,
    NumericalError = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImIterationStatus {
    Converged = 0,
    MaxIterations = 1,
    Stalled = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImInvariantResult {
    pub lower: f64,
    pub upper: f64,
    pub k_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: ImIterationStatus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ImStatus {
    match e {
        Error::InvalidInterval { .. } | Error::InvalidArgument(_) | Error::OutOfRange { .. } => {
            ImStatus::InvalidArgument
        }
        Error::EmptySupport | Error::InvalidAtoms(_) => ImStatus::InvalidMeasure,
        Error::NotMonotone { .. } | Error::InvalidGenerator(_) => ImStatus::InvalidGenerator,
        Error::InvalidFamily(_) => ImStatus::InvalidFamily,
        Error::OutOfDomain { .. } | Error::DomainMismatch(_) => ImStatus::DomainError,
        Error::ConvergenceFailure { .. } | Error::CapExceeded { .. } => {
            ImStatus::ConvergenceFailure
        }
        Error::NonFiniteValue { .. }
        | Error::MeanOutOfBounds { .. }
        | Error::InvariantViolation(_) => ImStatus::NumericalError,
    }
}

struct Failure(ImStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ImStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ImStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ImStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ImStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ImStatus::ParseError, format!("{what}: {e}")))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(ImStatus::ParseError, format!("{what}: {e}")))
}

fn discretization(nodes: usize) -> Result<Discretization, Failure> {
    Ok(Discretization::new(nodes)?)
}

/// Message describing the last failed call on this thread, or null. The
/// string stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn im_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a measure from `len` atoms; duplicates are merged and weights
/// renormalized.
///
/// # Safety
/// `points` and `weights` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn im_measure_new(
    points: *const f64,
    weights: *const f64,
    len: usize,
    lo: f64,
    hi: f64,
    out_measure: *mut *mut ImMeasure,
) -> ImStatus {
    guard(|| {
        let slot = out(out_measure, "out_measure")?;
        if len > 0 && (points.is_null() || weights.is_null()) {
            return Err(null("points or weights"));
        }
        let (xs, ws) = if len == 0 {
            (&[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(points, len),
                std::slice::from_raw_parts(weights, len),
            )
        };
        let m = Measure::new(
            xs.iter().copied().zip(ws.iter().copied()),
            Interval::new(lo, hi)?,
        )?;
        *slot = Box::into_raw(Box::new(ImMeasure(m)));
        Ok(())
    })
}

/// Parses `{"domain":[lo,hi],"atoms":[[x,w],...]}` strictly.
///
/// # Safety
/// `json` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn im_measure_from_json(
    json: *const c_char,
    out_measure: *mut *mut ImMeasure,
) -> ImStatus {
    guard(|| {
        let slot = out(out_measure, "out_measure")?;
        let m: Measure = parse(read_str(json, "json")?, "measure")?;
        *slot = Box::into_raw(Box::new(ImMeasure(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn im_measure_free(m: *mut ImMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn im_measure_len(m: *const ImMeasure, out_len: *mut usize) -> ImStatus {
    guard(|| {
        *out(out_len, "out_len")? = borrow(m, "measure")?.0.len();
        Ok(())
    })
}

/// Atom `index` in ascending order.
///
/// # Safety
/// `m` must be a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn im_measure_atom(
    m: *const ImMeasure,
    index: usize,
    out_point: *mut f64,
    out_weight: *mut f64,
) -> ImStatus {
    guard(|| {
        let m = &borrow(m, "measure")?.0;
        if index >= m.len() {
            return Err(Failure(
                ImStatus::InvalidArgument,
                format!("index {index} out of range for {} atoms", m.len()),
            ));
        }
        let (x, w) = (m.points()[index], m.weights()[index]);
        *out(out_point, "out_point")? = x;
        *out(out_weight, "out_weight")? = w;
        Ok(())
    })
}

/// Support hull `[min supp, max supp]`.
///
/// # Safety
/// `m` must be a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn im_measure_gamma(
    m: *const ImMeasure,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> ImStatus {
    guard(|| {
        let g = borrow(m, "measure")?.0.gamma();
        *out(out_lo, "out_lo")? = g.lo();
        *out(out_hi, "out_hi")? = g.hi();
        Ok(())
    })
}

/// # Safety
/// `m` must be a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn im_measure_mean_variance(
    m: *const ImMeasure,
    out_mean: *mut f64,
    out_variance: *mut f64,
) -> ImStatus {
    guard(|| {
        let (mean, var) = borrow(m, "measure")?.0.mean_and_variance();
        *out(out_mean, "out_mean")? = mean;
        *out(out_variance, "out_variance")? = var;
        Ok(())
    })
}

/// Parses a generator spec such as `{"kind":"power","p":0.5}` on `[lo, hi]`.
///
/// # Safety
/// `json` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn im_generator_from_json(
    json: *const c_char,
    lo: f64,
    hi: f64,
    out_generator: *mut *mut ImGenerator,
) -> ImStatus {
    guard(|| {
        let slot = out(out_generator, "out_generator")?;
        let kind: GeneratorKind = parse(read_str(json, "json")?, "generator")?;
        let g = Generator::new(kind, Interval::new(lo, hi)?)?;
        *slot = Box::into_raw(Box::new(ImGenerator(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn im_generator_free(g: *mut ImGenerator) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live generator handle.
#[no_mangle]
pub unsafe extern "C" fn im_generator_eval(
    g: *const ImGenerator,
    t: f64,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        let v = borrow(g, "generator")?.0.eval(t)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live generator handle.
#[no_mangle]
pub unsafe extern "C" fn im_generator_invert(
    g: *const ImGenerator,
    y: f64,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        let v = borrow(g, "generator")?.0.invert(y)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// `f⁻¹(∫ f dP)`.
///
/// # Safety
/// `g` and `m` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn im_qa_mean(
    g: *const ImGenerator,
    m: *const ImMeasure,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        let v = qa_mean(&borrow(g, "generator")?.0, &borrow(m, "measure")?.0)?.value;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Power mean of exponent `p` (`p = 0` is the geometric mean).
///
/// # Safety
/// `m` must be a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn im_power_mean(
    p: f64,
    m: *const ImMeasure,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        let v = power_mean(p, &borrow(m, "measure")?.0)?.value;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Parses a family spec `{"domain":[lo,hi],"pieces":[...]}`.
///
/// # Safety
/// `json` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn im_family_from_json(
    json: *const c_char,
    out_family: *mut *mut ImFamily,
) -> ImStatus {
    guard(|| {
        let slot = out(out_family, "out_family")?;
        let f: AdmissibleFamily = parse(read_str(json, "json")?, "family")?;
        *slot = Box::into_raw(Box::new(ImFamily(f)));
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn im_family_free(f: *mut ImFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// One application of the family operator with `nodes` quadrature nodes; the
/// result is a new measure owned by the caller.
///
/// # Safety
/// `f` and `m` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn im_family_apply(
    f: *const ImFamily,
    m: *const ImMeasure,
    nodes: usize,
    out_measure: *mut *mut ImMeasure,
) -> ImStatus {
    guard(|| {
        let slot = out(out_measure, "out_measure")?;
        let next = apply_family(
            &borrow(f, "family")?.0,
            &borrow(m, "measure")?.0,
            &discretization(nodes)?,
        )?;
        *slot = Box::into_raw(Box::new(ImMeasure(next)));
        Ok(())
    })
}

/// Iterates the family until the support hull is narrower than `tol`.
/// `tol <= 0` selects `1e-12·|I|`; `max_iter = 0` selects 10000.
///
/// # Safety
/// `f` and `m` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn im_compute_invariant(
    f: *const ImFamily,
    m: *const ImMeasure,
    nodes: usize,
    tol: f64,
    max_iter: usize,
    out_result: *mut ImInvariantResult,
) -> ImStatus {
    guard(|| {
        let slot = out(out_result, "out_result")?;
        let mut opts = IterationOptions::default();
        if tol > 0.0 {
            opts.tol = Some(tol);
        } else if tol.is_nan() {
            return Err(Failure(ImStatus::InvalidArgument, "tol is NaN".into()));
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let (r, _) = compute_invariant(
            &borrow(f, "family")?.0,
            &borrow(m, "measure")?.0,
            &discretization(nodes)?,
            &opts,
        )?;
        *slot = ImInvariantResult {
            lower: r.lower,
            upper: r.upper,
            k_value: r.k_value,
            gap: r.gap,
            iterations: r.iterations,
            status: match r.status {
                Status::Converged => ImIterationStatus::Converged,
                Status::MaxIterations => ImIterationStatus::MaxIterations,
                Status::Stalled => ImIterationStatus::Stalled,
            },
        };
        Ok(())
    })
}

/// Lower estimate of the separation `d_{f,g}(t)`.
///
/// # Safety
/// `f` and `g` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn im_separation(
    f: *const ImGenerator,
    g: *const ImGenerator,
    t: f64,
    grid: usize,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        let v = separation(&borrow(f, "f")?.0, &borrow(g, "g")?.0, t, grid)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Maximum separation over all pairs of `len` generators.
///
/// # Safety
/// `generators` must point to `len` live generator handles.
#[no_mangle]
pub unsafe extern "C" fn im_contraction_bound(
    generators: *const *const ImGenerator,
    len: usize,
    t: f64,
    grid: usize,
    out_value: *mut f64,
) -> ImStatus {
    guard(|| {
        if generators.is_null() {
            return Err(null("generators"));
        }
        let set = std::slice::from_raw_parts(generators, len)
            .iter()
            .enumerate()
            .map(|(i, &g)| Ok(borrow(g, &format!("generators[{i}]"))?.0.clone()))
            .collect::<Result<Vec<_>, Failure>>()?;
        let v = contraction_bound(&set, t, grid)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}
