//! C ABI over `grinpol`.
//!
//! Conventions:
//!
//! - Every fallible function returns a [`GpStatus`] and writes its result
//!   through an out-pointer. On failure the out-pointer is left untouched and
//!   [`gp_last_error`] describes the problem.
//! - Density matrices and count sets are opaque handles created by `gp_*`
//!   constructors and released with the matching `*_free` function. Passing
//!   NULL to a `*_free` function is a no-op.
//! - Matrices cross the boundary as 16 real and 16 imaginary parts in
//!   row-major order over the basis HH, HV, VH, VV.
//! - Panics never unwind into C; they surface as `GP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use grinpol::beam_optics;
use grinpol::expsim::CountRecord;
use grinpol::fitkit;
use grinpol::polkit::{self, BellState, DensityMatrix, Mat4};
use grinpol::tomo::{self, MleConfig, StartPoint, TomographySet};
use grinpol::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SingularPropagation = 3,
    InvalidState = 4,
    IncompleteSet = 5,
    Convergence = 6,
    Fit = 7,
    Parse = 8,
    Schema = 9,
    Io = 10,
    Panic = 11,
}

/// The four Bell states.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpBell {
    PhiPlus = 0,
    PhiMinus = 1,
    PsiPlus = 2,
    PsiMinus = 3,
}

impl From<GpBell> for BellState {
    fn from(b: GpBell) -> Self {
        match b {
            GpBell::PhiPlus => BellState::PhiPlus,
            GpBell::PhiMinus => BellState::PhiMinus,
            GpBell::PsiPlus => BellState::PsiPlus,
            GpBell::PsiMinus => BellState::PsiMinus,
        }
    }
}

/// Opaque two-qubit density matrix.
pub struct GpDensityMatrix {
    inner: DensityMatrix,
}

/// Opaque set of tomography count records.
pub struct GpCountSet {
    records: Vec<CountRecord>,
}

/// Summary of a fringe fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GpSinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
    pub visibility: f64,
    pub visibility_std: f64,
    pub residual_norm: f64,
}

/// Summary of a profile fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GpGaussianFit {
    pub baseline: f64,
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub fwhm: f64,
    pub fwhm_std: f64,
    pub residual_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GpStatus {
    match e {
        Error::InvalidParameter(_) => GpStatus::InvalidArgument,
        Error::SingularPropagation => GpStatus::SingularPropagation,
        Error::InvalidState(_) => GpStatus::InvalidState,
        Error::IncompleteSet { .. } => GpStatus::IncompleteSet,
        Error::Convergence { .. } => GpStatus::Convergence,
        Error::Fit(_) => GpStatus::Fit,
        Error::Parse { .. } | Error::Json(_) => GpStatus::Parse,
        Error::Schema(_) => GpStatus::Schema,
        Error::Io(_) => GpStatus::Io,
    }
}

struct Failure(GpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(GpStatus::NullPointer, format!("`{name}` is NULL"))
}

/// Run `f`, record any error and convert panics into `Panic`.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            GpStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next `gp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---- beam optics -------------------------------------------------------

/// Equivalent focal length `1/(n0 g)` of a GRIN rod.
///
/// # Safety
/// `out_f` must be NULL or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn gp_focal_length(n0: f64, g: f64, out_f: *mut f64) -> GpStatus {
    guard(|| {
        let lens = beam_optics::GrinLens::quarter_pitch(n0, g, 0.0)?;
        *out(out_f, "out_f")? = beam_optics::focal_length(&lens)?;
        Ok(())
    })
}

/// Coupled waist `lambda f / (pi W0)`.
///
/// # Safety
/// `out_waist` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_coupled_waist(
    wavelength: f64,
    fiber_waist: f64,
    focal_length: f64,
    out_waist: *mut f64,
) -> GpStatus {
    guard(|| {
        *out(out_waist, "out_waist")? =
            beam_optics::coupled_waist(wavelength, fiber_waist, focal_length)?;
        Ok(())
    })
}

/// Confocal parameter `pi W^2 / lambda`.
///
/// # Safety
/// `out_z` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_confocal_parameter(
    waist: f64,
    wavelength: f64,
    out_z: *mut f64,
) -> GpStatus {
    guard(|| {
        *out(out_z, "out_z")? = beam_optics::confocal_parameter(waist, wavelength)?;
        Ok(())
    })
}

/// Lateral-offset coupling between two waists; 0 for non-positive waists.
#[no_mangle]
pub extern "C" fn gp_coupling_efficiency_lateral(waist_a: f64, waist_b: f64, offset: f64) -> f64 {
    beam_optics::coupling_efficiency_lateral(waist_a, waist_b, offset)
}

/// FWHM of the lateral-offset coupling curve.
#[no_mangle]
pub extern "C" fn gp_lateral_fwhm(waist_a: f64, waist_b: f64) -> f64 {
    beam_optics::lateral_fwhm(waist_a, waist_b)
}

// ---- density matrices --------------------------------------------------

fn boxed(rho: DensityMatrix) -> *mut GpDensityMatrix {
    Box::into_raw(Box::new(GpDensityMatrix { inner: rho }))
}

unsafe fn density<'a>(p: *const GpDensityMatrix, name: &str) -> Result<&'a DensityMatrix, Failure> {
    p.as_ref().map(|d| &d.inner).ok_or_else(|| null(name))
}

/// Pure Bell-state density matrix.
///
/// # Safety
/// `out_rho` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_density_bell(
    kind: GpBell,
    out_rho: *mut *mut GpDensityMatrix,
) -> GpStatus {
    guard(|| {
        let slot = out(out_rho, "out_rho")?;
        *slot = boxed(polkit::bell_state(kind.into()).density());
        Ok(())
    })
}

/// Density matrix from 16 real and 16 imaginary parts (row-major). The
/// matrix must be Hermitian, unit-trace and positive semidefinite.
///
/// # Safety
/// `re` and `im` must point to 16 doubles each; `out_rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_density_from_parts(
    re: *const f64,
    im: *const f64,
    out_rho: *mut *mut GpDensityMatrix,
) -> GpStatus {
    guard(|| {
        let re = slice(re, 16, "re")?;
        let im = slice(im, 16, "im")?;
        let slot = out(out_rho, "out_rho")?;
        let m = Mat4::from_fn(|i, j| polkit::C64::new(re[4 * i + j], im[4 * i + j]));
        *slot = boxed(DensityMatrix::new(m)?);
        Ok(())
    })
}

/// Copy a matrix out as 16 real and 16 imaginary parts (row-major).
///
/// # Safety
/// `rho` must be a live handle; `re` and `im` must have room for 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_density_parts(
    rho: *const GpDensityMatrix,
    re: *mut f64,
    im: *mut f64,
) -> GpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let re = std::slice::from_raw_parts_mut(re, 16);
        let im = std::slice::from_raw_parts_mut(im, 16);
        for i in 0..4 {
            for j in 0..4 {
                let v = rho.matrix()[(i, j)];
                re[4 * i + j] = v.re;
                im[4 * i + j] = v.im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `rho` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gp_density_free(rho: *mut GpDensityMatrix) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Fidelity `<B|rho|B>` with a Bell state.
///
/// # Safety
/// `rho` must be a live handle; `out_f` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_fidelity_bell(
    rho: *const GpDensityMatrix,
    kind: GpBell,
    out_f: *mut f64,
) -> GpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        *out(out_f, "out_f")? = polkit::fidelity(rho, &polkit::bell_state(kind.into()));
        Ok(())
    })
}

/// Wootters concurrence.
///
/// # Safety
/// `rho` must be a live handle; `out_c` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_concurrence(rho: *const GpDensityMatrix, out_c: *mut f64) -> GpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        *out(out_c, "out_c")? = polkit::concurrence(rho)?;
        Ok(())
    })
}

/// Tangle, the squared concurrence.
///
/// # Safety
/// `rho` must be a live handle; `out_t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_tangle(rho: *const GpDensityMatrix, out_t: *mut f64) -> GpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        *out(out_t, "out_t")? = polkit::tangle(rho)?;
        Ok(())
    })
}

/// Purity `tr(rho^2)`.
///
/// # Safety
/// `rho` must be a live handle; `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_purity(rho: *const GpDensityMatrix, out_p: *mut f64) -> GpStatus {
    guard(|| {
        *out(out_p, "out_p")? = density(rho, "rho")?.purity();
        Ok(())
    })
}

// ---- tomography --------------------------------------------------------

unsafe fn counts<'a>(p: *const GpCountSet) -> Result<&'a [CountRecord], Failure> {
    p.as_ref()
        .map(|c| c.records.as_slice())
        .ok_or_else(|| null("counts"))
}

/// Poisson counts of the 16 standard settings around `mean_total * tr(P rho)`.
///
/// # Safety
/// `rho` must be a live handle; `out_counts` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_counts_simulate(
    rho: *const GpDensityMatrix,
    mean_total: f64,
    seed: u64,
    out_counts: *mut *mut GpCountSet,
) -> GpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        let slot = out(out_counts, "out_counts")?;
        let records =
            tomo::simulate_tomography_counts(rho, &TomographySet::standard(), mean_total, seed)?;
        *slot = Box::into_raw(Box::new(GpCountSet { records }));
        Ok(())
    })
}

/// Parse a count CSV (`setting_label,coincidences,singles_1,singles_2,duration_s`).
///
/// # Safety
/// `csv_text` must be a NUL-terminated string; `out_counts` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_counts_from_csv(
    csv_text: *const c_char,
    out_counts: *mut *mut GpCountSet,
) -> GpStatus {
    guard(|| {
        if csv_text.is_null() {
            return Err(null("csv_text"));
        }
        let bytes = CStr::from_ptr(csv_text).to_bytes();
        let slot = out(out_counts, "out_counts")?;
        let records = grinpol::io::read_counts(bytes, &TomographySet::standard())?;
        *slot = Box::into_raw(Box::new(GpCountSet { records }));
        Ok(())
    })
}

/// Number of records in a count set (0 for NULL).
///
/// # Safety
/// `counts` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_counts_len(counts: *const GpCountSet) -> usize {
    counts.as_ref().map_or(0, |c| c.records.len())
}

/// Coincidences of record `index`.
///
/// # Safety
/// `counts_set` must be a live handle; `out_n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_counts_coincidences(
    counts_set: *const GpCountSet,
    index: usize,
    out_n: *mut u64,
) -> GpStatus {
    guard(|| {
        let recs = counts(counts_set)?;
        let rec = recs.get(index).ok_or_else(|| {
            Failure(
                GpStatus::InvalidArgument,
                format!("index {index} out of range ({} records)", recs.len()),
            )
        })?;
        *out(out_n, "out_n")? = rec.coincidences;
        Ok(())
    })
}

/// # Safety
/// `counts` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gp_counts_free(counts: *mut GpCountSet) {
    if !counts.is_null() {
        drop(Box::from_raw(counts));
    }
}

/// Maximum-likelihood reconstruction from the linear-inversion start.
/// Pass 0 for `max_iterations` or `gradient_tolerance` to use the defaults
/// (500 and 1e-9). On `GP_STATUS_CONVERGENCE` no matrix is returned.
///
/// # Safety
/// `counts_set` must be a live handle; `out_rho` must be writable;
/// `out_iterations` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gp_mle_reconstruct(
    counts_set: *const GpCountSet,
    max_iterations: usize,
    gradient_tolerance: f64,
    out_rho: *mut *mut GpDensityMatrix,
    out_iterations: *mut usize,
) -> GpStatus {
    guard(|| {
        let recs = counts(counts_set)?;
        let slot = out(out_rho, "out_rho")?;
        let mut cfg = MleConfig {
            start: StartPoint::LinearInversion,
            ..MleConfig::default()
        };
        if max_iterations > 0 {
            cfg.max_iterations = max_iterations;
        }
        if gradient_tolerance > 0.0 {
            cfg.gradient_tolerance = gradient_tolerance;
        }
        let res = tomo::mle_reconstruct(recs, &cfg)?;
        if let Some(it) = out_iterations.as_mut() {
            *it = res.iterations;
        }
        *slot = boxed(res.state);
        Ok(())
    })
}

// ---- fits --------------------------------------------------------------

/// Fit `offset (1 + V cos(2 pi x / period + phase))` to `n` points.
/// `weights` may be NULL for an unweighted fit.
///
/// # Safety
/// `xs`, `ys` (and `weights` when non-NULL) must hold `n` doubles;
/// `out_fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_fit_sinusoid(
    xs: *const f64,
    ys: *const f64,
    weights: *const f64,
    n: usize,
    out_fit: *mut GpSinusoidFit,
) -> GpStatus {
    guard(|| {
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n, "weights")?)
        };
        let slot = out(out_fit, "out_fit")?;
        let f = fitkit::fit_sinusoid(xs, ys, w)?;
        *slot = GpSinusoidFit {
            offset: f.offset,
            amplitude: f.amplitude,
            period: f.period,
            phase: f.phase,
            visibility: f.visibility,
            visibility_std: f.uncertainties.visibility,
            residual_norm: f.residual_norm,
        };
        Ok(())
    })
}

/// Fit `baseline + A exp(-(x - center)^2 / (2 sigma^2))` to `n` points.
///
/// # Safety
/// As for [`gp_fit_sinusoid`].
#[no_mangle]
pub unsafe extern "C" fn gp_fit_gaussian(
    xs: *const f64,
    ys: *const f64,
    weights: *const f64,
    n: usize,
    out_fit: *mut GpGaussianFit,
) -> GpStatus {
    guard(|| {
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n, "weights")?)
        };
        let slot = out(out_fit, "out_fit")?;
        let f = fitkit::fit_gaussian(xs, ys, w)?;
        *slot = GpGaussianFit {
            baseline: f.baseline,
            amplitude: f.amplitude,
            center: f.center,
            sigma: f.sigma,
            fwhm: f.fwhm,
            fwhm_std: f.uncertainties.fwhm,
            residual_norm: f.residual_norm,
        };
        Ok(())
    })
}
