//! C ABI for the cxd pipeline.
//!
//! Objects cross the boundary as opaque handles, each released with its
//! matching `*_free` function. Every fallible
//! function returns a [`CxdStatus`]; on failure `cxd_last_error` describes the
//! problem. Strings returned through `char **` belong to the caller and are
//! released with `cxd_string_free`.

use std::borrow::Cow;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cxd::backends::{build_retouch_request, MockDenoiser, ScriptedPlanner, TemplatePlanner};
use cxd::composer::{LatentShape, ModulationParams};
use cxd::{
    build_plan, AnalysisError, BackendError, ComposeError, CompositionPlan, LatentGrid, Lexicon, PlanError,
};

/// Result of every fallible call. The numeric values match the exit codes
/// of the `cxd` command where both exist.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CxdStatus {
    Ok = 0,
    /// A null pointer, invalid UTF-8 or an out-of-range index.
    InvalidArgument = 1,
    /// Bad prompt, plan, lexicon or parameters.
    InputError = 2,
    /// The requested spatial relations admit no layout.
    Infeasible = 3,
    BackendFailure = 4,
    /// A bug: the library panicked.
    Internal = 5,
}

pub struct CxdLexicon {
    inner: Lexicon,
}

pub struct CxdPlan {
    inner: CompositionPlan,
}

pub struct CxdLatent {
    inner: LatentGrid,
}

/// Sampler settings; `cxd_modulation_defaults` gives the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CxdModulationParams {
    pub lambda_pos: f64,
    pub lambda_neg: f64,
    pub omega: f64,
    pub steps: u32,
    pub seed: u64,
}

impl From<CxdModulationParams> for ModulationParams {
    fn from(p: CxdModulationParams) -> Self {
        ModulationParams {
            lambda_pos: p.lambda_pos,
            lambda_neg: p.lambda_neg,
            omega: p.omega,
            steps: p.steps as usize,
            seed: p.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CxdStatus, String);

impl Failure {
    fn arg(message: impl Into<String>) -> Failure {
        Failure(CxdStatus::InvalidArgument, message.into())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let status = match &e {
            PlanError::LayoutInfeasible(_) | PlanError::UnsatisfiableBudget { .. } => CxdStatus::Infeasible,
            PlanError::BackendFailure(BackendError::MissingImage) => CxdStatus::InputError,
            PlanError::BackendFailure(_) => CxdStatus::BackendFailure,
            PlanError::Analysis(_) | PlanError::InvalidPlan(_) => CxdStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure(CxdStatus::InputError, e.to_string())
    }
}

impl From<ComposeError> for Failure {
    fn from(e: ComposeError) -> Self {
        let status = match e {
            ComposeError::BackendFailure(_) => CxdStatus::BackendFailure,
            _ => CxdStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        PlanError::from(e).into()
    }
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

/// Runs `body`, records any failure and turns panics into `Internal`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CxdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            CxdStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal error: the library panicked");
            CxdStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::arg(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::arg(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::arg(format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::arg("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::arg("output pointer is null"));
    }
    let value =
        CString::new(value).map_err(|_| Failure(CxdStatus::Internal, "string holds a NUL byte".into()))?;
    *out = value.into_raw();
    Ok(())
}

unsafe fn lexicon_or_builtin<'a>(lexicon: *const CxdLexicon) -> Cow<'a, Lexicon> {
    match lexicon.as_ref() {
        Some(l) => Cow::Borrowed(&l.inner),
        None => Cow::Owned(Lexicon::builtin()),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cxd_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cxd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a lexicon file; a null path gives the built-in lexicon.
///
/// # Safety
/// `path` is null or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_lexicon_load(path: *const c_char, out: *mut *mut CxdLexicon) -> CxdStatus {
    guard(|| {
        let inner = if path.is_null() {
            Lexicon::builtin()
        } else {
            Lexicon::from_file(text(path, "path")?)
                .map_err(|e| Failure(CxdStatus::InputError, e.to_string()))?
        };
        put(out, CxdLexicon { inner })
    })
}

/// # Safety
/// `lexicon` is null or a handle from `cxd_lexicon_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cxd_lexicon_free(lexicon: *mut CxdLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Complexity report of `prompt` as JSON. A null lexicon means the built-in
/// one.
///
/// # Safety
/// Pointers are null or valid as documented above; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_analyze(
    lexicon: *const CxdLexicon,
    prompt: *const c_char,
    out_json: *mut *mut c_char,
) -> CxdStatus {
    guard(|| {
        let lexicon = lexicon_or_builtin(lexicon);
        let analysis = cxd::analyze(text(prompt, "prompt")?, &lexicon, &Default::default())?;
        put_string(out_json, analysis.report.to_json())
    })
}

/// Plans `prompt` with the built-in planner, or replays the recorded replies
/// in `fixtures_dir` when it is not null.
///
/// # Safety
/// `prompt` is a NUL-terminated string; `lexicon` and `fixtures_dir` are null
/// or valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_build(
    lexicon: *const CxdLexicon,
    prompt: *const c_char,
    fixtures_dir: *const c_char,
    out: *mut *mut CxdPlan,
) -> CxdStatus {
    guard(|| {
        let lexicon = lexicon_or_builtin(lexicon);
        let prompt = text(prompt, "prompt")?;
        let config = Default::default();
        let inner = if fixtures_dir.is_null() {
            build_plan(prompt, &TemplatePlanner, &lexicon, &config)?
        } else {
            let dir = Path::new(text(fixtures_dir, "fixtures_dir")?);
            build_plan(prompt, &ScriptedPlanner::new(dir), &lexicon, &config)?
        };
        put(out, CxdPlan { inner })
    })
}

/// Parses and validates a plan document.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_from_json(json: *const c_char, out: *mut *mut CxdPlan) -> CxdStatus {
    guard(|| {
        let inner = CompositionPlan::from_json(text(json, "json")?)?;
        put(out, CxdPlan { inner })
    })
}

/// # Safety
/// `plan` is a live plan handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_to_json(plan: *const CxdPlan, out_json: *mut *mut c_char) -> CxdStatus {
    guard(|| put_string(out_json, handle(plan, "plan")?.inner.to_json()))
}

/// Number of foreground regions; 0 for a null handle.
///
/// # Safety
/// `plan` is null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_region_count(plan: *const CxdPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.inner.foreground.len())
}

/// Box of region `index` as `[x, y, width, height]` in image fractions.
///
/// # Safety
/// `plan` is a live plan handle; `out_box` points to four doubles.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_region_box(
    plan: *const CxdPlan,
    index: usize,
    out_box: *mut f64,
) -> CxdStatus {
    guard(|| {
        let plan = handle(plan, "plan")?;
        let placed = plan
            .inner
            .foreground
            .get(index)
            .ok_or_else(|| Failure::arg(format!("region {index} of {}", plan.inner.foreground.len())))?;
        if out_box.is_null() {
            return Err(Failure::arg("out_box is null"));
        }
        let b = placed.bbox;
        ptr::copy_nonoverlapping([b.x, b.y, b.w, b.h].as_ptr(), out_box, 4);
        Ok(())
    })
}

/// Retouch request for an image painted from `plan`, as JSON.
///
/// # Safety
/// `plan` is a live plan handle; `image_ref` is a NUL-terminated string;
/// `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_retouch_request(
    plan: *const CxdPlan,
    image_ref: *const c_char,
    out_json: *mut *mut c_char,
) -> CxdStatus {
    guard(|| {
        let req = build_retouch_request(&handle(plan, "plan")?.inner, text(image_ref, "image_ref")?)?;
        put_string(out_json, serde_json::to_string(&req).expect("requests serialize"))
    })
}

/// # Safety
/// `plan` is null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cxd_plan_free(plan: *mut CxdPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

#[no_mangle]
pub extern "C" fn cxd_modulation_defaults() -> CxdModulationParams {
    let d = ModulationParams::default();
    CxdModulationParams {
        lambda_pos: d.lambda_pos,
        lambda_neg: d.lambda_neg,
        omega: d.omega,
        steps: d.steps as u32,
        seed: d.seed,
    }
}

/// Paints `plan` with the built-in deterministic denoiser on a
/// `height x width x channels` latent. A null `params` means the defaults.
///
/// # Safety
/// `plan` is a live plan handle; `params` is null or readable; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_paint_mock(
    plan: *const CxdPlan,
    params: *const CxdModulationParams,
    height: usize,
    width: usize,
    channels: usize,
    out: *mut *mut CxdLatent,
) -> CxdStatus {
    guard(|| {
        let plan = handle(plan, "plan")?;
        let params = params.as_ref().copied().unwrap_or_else(|| cxd_modulation_defaults());
        let shape = LatentShape::new(height, width, channels);
        let inner = cxd::run_sampling(&plan.inner, &params.into(), shape, &MockDenoiser)?;
        put(out, CxdLatent { inner })
    })
}

/// Reads a latent dump written by `cxd paint` or `cxd_latent_write`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_read(path: *const c_char, out: *mut *mut CxdLatent) -> CxdStatus {
    guard(|| {
        let path = text(path, "path")?;
        let bytes =
            std::fs::read(path).map_err(|e| Failure(CxdStatus::InputError, format!("{path}: {e}")))?;
        put(out, CxdLatent { inner: LatentGrid::from_bytes(&bytes)? })
    })
}

/// # Safety
/// `latent` is a live latent handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_write(latent: *const CxdLatent, path: *const c_char) -> CxdStatus {
    guard(|| {
        let latent = handle(latent, "latent")?;
        let path = text(path, "path")?;
        std::fs::write(path, latent.inner.to_bytes())
            .map_err(|e| Failure(CxdStatus::InputError, format!("{path}: {e}")))
    })
}

/// Writes the latent's height, width and channel count. Any output pointer
/// may be null.
///
/// # Safety
/// `latent` is a live latent handle; non-null outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_dims(
    latent: *const CxdLatent,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> CxdStatus {
    guard(|| {
        let s = handle(latent, "latent")?.inner.shape();
        for (out, v) in [(height, s.height), (width, s.width), (channels, s.channels)] {
            if let Some(out) = out.as_mut() {
                *out = v;
            }
        }
        Ok(())
    })
}

/// Row-major, channels-last values; `height * width * channels` doubles
/// owned by the handle. Null for a null handle.
///
/// # Safety
/// `latent` is null or a live latent handle.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_data(latent: *const CxdLatent) -> *const f64 {
    latent.as_ref().map_or(ptr::null(), |l| l.inner.values().as_ptr())
}

/// SHA-256 of the latent dump, as lowercase hex.
///
/// # Safety
/// `latent` is a live latent handle; `out_hex` is writable.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_checksum(
    latent: *const CxdLatent,
    out_hex: *mut *mut c_char,
) -> CxdStatus {
    guard(|| put_string(out_hex, handle(latent, "latent")?.inner.checksum()))
}

/// # Safety
/// `latent` is null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cxd_latent_free(latent: *mut CxdLatent) {
    if !latent.is_null() {
        drop(Box::from_raw(latent));
    }
}
