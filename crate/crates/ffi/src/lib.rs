//! C ABI for sshap.
//!
//! Every fallible function returns an [`SshapStatus`]. On failure the
//! calling thread's last error message is available from
//! [`sshap_last_error_message`] until the next call into the library.
//! Compositions cross the boundary as arrays of `D` positive doubles that
//! sum to one (use [`sshap_closure`] to close raw values); handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use sshap::class_geometry::class_composition;
use sshap::document::{ExplanationDocument, Provenance};
use sshap::ilr::{basis_from_tree, gram_schmidt_basis, BalanceTree, OrthonormalBasis};
use sshap::model::{ModelHandle, Predictor};
use sshap::shapley::{exact_shapley, mc_shapley, CharacteristicContext, Explanation, McOptions};
use sshap::{Composition, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    InvalidComposition = 4,
    DimensionMismatch = 5,
    InvalidData = 6,
    ModelError = 7,
    BudgetError = 8,
    IoError = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshapMode {
    Exact = 0,
    MonteCarlo = 1,
}

/// Estimator settings for [`sshap_explain`]. `m_max = 0` selects
/// `1000 * features`; `epsilon <= 0` disables the efficiency adjustment.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SshapExplainOptions {
    pub mode: SshapMode,
    pub m_max: usize,
    pub m_min: usize,
    pub seed: u64,
    pub epsilon: f64,
}

/// An orthonormal basis of the simplex.
pub struct SshapBasis {
    inner: OrthonormalBasis,
}

/// A loaded builtin model or a running external model process.
pub struct SshapModel {
    inner: ModelHandle,
    spec: String,
}

/// A computed explanation.
pub struct SshapExplanation {
    inner: ExplanationDocument,
}

struct Failure {
    status: SshapStatus,
    message: String,
}

impl Failure {
    fn new(status: SshapStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NonPositivePart { .. }
            | Error::NotNormalized { .. }
            | Error::DimensionTooSmall(_)
            | Error::EmptySample
            | Error::IndexOutOfRange { .. }
            | Error::ZeroNormOperand => SshapStatus::InvalidComposition,
            Error::DimensionMismatch { .. } => SshapStatus::DimensionMismatch,
            Error::Io { .. } => SshapStatus::IoError,
            Error::Usage(_) => SshapStatus::InvalidArgument,
            _ => match e.exit_code() {
                3 => SshapStatus::ModelError,
                4 => SshapStatus::BudgetError,
                _ => SshapStatus::InvalidData,
            },
        };
        Failure::new(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Outcome) -> SshapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SshapStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_last_error(&format!("panic: {msg}"));
            SshapStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(SshapStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if n < need {
        return Err(Failure::new(
            SshapStatus::BufferTooSmall,
            format!("{what} holds {n} values, {need} needed"),
        ));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SshapStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn composition(p: *const f64, n: usize, what: &str) -> Result<Composition, Failure> {
    Ok(Composition::new(input(p, n, what)?.to_vec())?)
}

fn write(dst: &mut [f64], src: &[f64]) {
    dst.copy_from_slice(src);
}

/// Message describing the last failure on this thread, or null. The string
/// is owned by the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sshap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sshap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Closes `n` positive values to sum to one.
///
/// # Safety
/// `raw` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_closure(raw: *const f64, n: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let c = Composition::closure(input(raw, n, "raw")?)?;
        write(output(out, n, n, "out")?, c.parts());
        Ok(())
    })
}

/// `out = x ⊕ y`.
///
/// # Safety
/// `x`, `y` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_perturb(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let z = composition(x, n, "x")?.perturb(&composition(y, n, "y")?)?;
        write(output(out, n, n, "out")?, z.parts());
        Ok(())
    })
}

/// `out = alpha ⊙ x`.
///
/// # Safety
/// `x` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_power(x: *const f64, n: usize, alpha: f64, out: *mut f64) -> SshapStatus {
    guard(|| {
        let z = composition(x, n, "x")?.power(alpha);
        write(output(out, n, n, "out")?, z.parts());
        Ok(())
    })
}

/// Aitchison inner product of `x` and `y`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn sshap_inner(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let v = composition(x, n, "x")?.inner(&composition(y, n, "y")?)?;
        write(output(out, 1, 1, "out")?, &[v]);
        Ok(())
    })
}

/// Aitchison norm of `x`.
///
/// # Safety
/// `x` must point to `n` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn sshap_norm(x: *const f64, n: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let v = composition(x, n, "x")?.norm();
        write(output(out, 1, 1, "out")?, &[v]);
        Ok(())
    })
}

/// Aitchison distance between `x` and `y`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn sshap_distance(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let v = composition(x, n, "x")?.distance(&composition(y, n, "y")?)?;
        write(output(out, 1, 1, "out")?, &[v]);
        Ok(())
    })
}

/// Unit-norm composition pointing towards class `k` of `classes`.
///
/// # Safety
/// `out` must point to `classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_class_composition(k: usize, classes: usize, out: *mut f64) -> SshapStatus {
    guard(|| {
        let c = class_composition(k, classes)?;
        write(output(out, classes, classes, "out")?, c.value.parts());
        Ok(())
    })
}

/// Gram-Schmidt basis of the `classes`-part simplex.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_gram_schmidt(classes: usize, out: *mut *mut SshapBasis) -> SshapStatus {
    guard(|| {
        let inner = gram_schmidt_basis(classes)?;
        store(out, SshapBasis { inner }, "out")
    })
}

/// Balance-tree basis from a JSON tree with integer class leaves.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_from_tree_json(json: *const c_char, out: *mut *mut SshapBasis) -> SshapStatus {
    guard(|| {
        let tree = BalanceTree::from_json_str(text(json, "json")?, None)?;
        store(out, SshapBasis { inner: basis_from_tree(&tree) }, "out")
    })
}

/// Number of parts `D` of the basis, or 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_classes(basis: *const SshapBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.classes())
}

/// ILR coordinates of the `D`-part composition `x` into `out` (`D - 1` values).
///
/// # Safety
/// `basis` must be a live handle; `x` must point to `n` doubles and `out`
/// to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_ilr(
    basis: *const SshapBasis,
    x: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.inner;
        let c = b.coords(&composition(x, n, "x")?)?;
        write(output(out, out_len, c.len(), "out")?, &c);
        Ok(())
    })
}

/// Composition with ILR coordinates `coords` into `out` (`D` values).
///
/// # Safety
/// `basis` must be a live handle; `coords` must point to `n` doubles and
/// `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_ilr_inv(
    basis: *const SshapBasis,
    coords: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.inner;
        let c = b.from_coords(input(coords, n, "coords")?)?;
        write(output(out, out_len, c.dim(), "out")?, c.parts());
        Ok(())
    })
}

/// # Safety
/// `basis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sshap_basis_free(basis: *mut SshapBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Opens `builtin:<model.json>` or `exec:<command line>`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sshap_model_open(spec: *const c_char, timeout_ms: u64, out: *mut *mut SshapModel) -> SshapStatus {
    guard(|| {
        let spec = text(spec, "spec")?;
        let inner = ModelHandle::open(spec, timeout_ms)?;
        store(
            out,
            SshapModel {
                inner,
                spec: spec.to_owned(),
            },
            "out",
        )
    })
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_model_num_classes(model: *const SshapModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_classes())
}

/// Number of features, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_model_num_features(model: *const SshapModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_features())
}

unsafe fn rows(p: *const f64, n_rows: usize, n_features: usize, what: &str) -> Result<Vec<Vec<f64>>, Failure> {
    let flat = input(p, n_rows * n_features, what)?;
    if n_features == 0 {
        return Ok(vec![Vec::new(); n_rows]);
    }
    Ok(flat.chunks(n_features).map(<[f64]>::to_vec).collect())
}

/// Predicts `n_rows` row-major instances into `out` (`n_rows * D` values).
///
/// # Safety
/// `model` must be a live handle; `instances` must point to
/// `n_rows * n_features` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_model_predict(
    model: *const SshapModel,
    instances: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let x = rows(instances, n_rows, n_features, "instances")?;
        let k = m.num_classes();
        let dst = output(out, out_len, n_rows * k, "out")?;
        let preds = m.predict(&x)?;
        for (chunk, p) in dst.chunks_mut(k).zip(&preds) {
            write(chunk, p.parts());
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sshap_model_free(model: *mut SshapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Exact mode with the default sampling settings filled in.
#[no_mangle]
pub extern "C" fn sshap_explain_options_default() -> SshapExplainOptions {
    SshapExplainOptions {
        mode: SshapMode::Exact,
        m_max: 0,
        m_min: 30,
        seed: 0,
        epsilon: 1e-6,
    }
}

/// Explains `instance` against `n_background` row-major background rows.
///
/// # Safety
/// `model` and `basis` must be live handles; `instance` must point to
/// `n_features` doubles, `background` to `n_background * n_features`
/// doubles; `options` may be null for the defaults; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sshap_explain(
    model: *const SshapModel,
    basis: *const SshapBasis,
    instance: *const f64,
    n_features: usize,
    background: *const f64,
    n_background: usize,
    options: *const SshapExplainOptions,
    out: *mut *mut SshapExplanation,
) -> SshapStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let b = &handle(basis, "basis")?.inner;
        let opts = options.as_ref().copied().unwrap_or_else(|| sshap_explain_options_default());
        let x = input(instance, n_features, "instance")?;
        let bg = rows(background, n_background, n_features, "background")?;
        let features = match m.inner.feature_names() {
            Some(names) if names.len() == n_features => names.to_vec(),
            _ => (0..n_features).map(|i| format!("x{i}")).collect(),
        };
        let ctx = CharacteristicContext::new(&m.inner, x, &bg, b)?
            .with_names(features, m.inner.class_names().to_vec())?;
        let ex: Explanation = match opts.mode {
            SshapMode::Exact => exact_shapley(&ctx)?,
            SshapMode::MonteCarlo => mc_shapley(
                &ctx,
                &McOptions {
                    m_max: if opts.m_max == 0 { 1000 * n_features } else { opts.m_max },
                    m_min: opts.m_min,
                    seed: opts.seed,
                    epsilon: (opts.epsilon > 0.0).then_some(opts.epsilon),
                },
            )?,
        };
        let inner = ExplanationDocument::new(ex, Provenance::new(m.spec.clone()));
        store(out, SshapExplanation { inner }, "out")
    })
}

/// Number of explained features, or 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_num_features(e: *const SshapExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.inner.features.len())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_num_classes(e: *const SshapExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.inner.classes())
}

/// Shapley composition of feature `i` into `out` (`D` values).
///
/// # Safety
/// `e` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_shapley(
    e: *const SshapExplanation,
    i: usize,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let f = feature(e, i)?;
        write(output(out, out_len, f.shapley.dim(), "out")?, f.shapley.parts());
        Ok(())
    })
}

/// ILR coordinates of feature `i` into `out` (`D - 1` values).
///
/// # Safety
/// `e` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_ilr(
    e: *const SshapExplanation,
    i: usize,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let f = feature(e, i)?;
        write(output(out, out_len, f.ilr.len(), "out")?, &f.ilr);
        Ok(())
    })
}

unsafe fn feature<'a>(e: *const SshapExplanation, i: usize) -> Result<&'a sshap::shapley::FeatureAttribution, Failure> {
    let doc = &handle(e, "explanation")?.inner;
    doc.features.get(i).ok_or_else(|| {
        Failure::new(
            SshapStatus::InvalidArgument,
            format!("feature {i} out of range for {} features", doc.features.len()),
        )
    })
}

/// Base distribution into `out` (`D` values).
///
/// # Safety
/// `e` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_base(e: *const SshapExplanation, out: *mut f64, out_len: usize) -> SshapStatus {
    guard(|| {
        let c = &handle(e, "explanation")?.inner.base;
        write(output(out, out_len, c.dim(), "out")?, c.parts());
        Ok(())
    })
}

/// Predicted distribution into `out` (`D` values).
///
/// # Safety
/// `e` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_prediction(
    e: *const SshapExplanation,
    out: *mut f64,
    out_len: usize,
) -> SshapStatus {
    guard(|| {
        let c = &handle(e, "explanation")?.inner.prediction;
        write(output(out, out_len, c.dim(), "out")?, c.parts());
        Ok(())
    })
}

/// Aitchison distance between the perturbed attributions and
/// `prediction ⊖ base`, or NaN for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_efficiency_residual(e: *const SshapExplanation) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.inner.explanation().efficiency_residual())
}

/// Serialises the explanation document. Release `*out` with
/// [`sshap_string_free`].
///
/// # Safety
/// `e` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_to_json(e: *const SshapExplanation, out: *mut *mut c_char) -> SshapStatus {
    guard(|| {
        let json = handle(e, "explanation")?.inner.to_json()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = CString::new(json).map_err(|e| Failure::new(SshapStatus::InvalidData, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sshap_explanation_free(e: *mut SshapExplanation) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sshap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
