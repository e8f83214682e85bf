//! C ABI over `pixelcode`.
//!
//! Conventions:
//! - Every fallible call returns a [`PcStatus`]; `PC_STATUS_OK` is zero. The
//!   message for the most recent failure on the calling thread is available
//!   through [`pc_last_error_message`].
//! - Models and codebooks are opaque handles released with their `_free`
//!   function. Passing `NULL` to a `_free` function is a no-op.
//! - Complex arrays are interleaved `re, im` doubles. Matrices are row-major.
//! - Coders are arrays of `q` bytes, each 0 (switch on) or 1 (switch off).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use pixelcode::analysis::pattern_svd;
use pixelcode::antenna_model::{
    load_model, port_currents, radiation_pattern, save_model, synthesize_model, validate_model,
    AntennaCoder, PixelAntennaModel, SynthesisSpec,
};
use pixelcode::beamspace::{TransmitPattern, VirtualChannel};
use pixelcode::codebook::{load_codebook, select_coder, Codebook};
use pixelcode::linalg::{CMatrix, CVector};
use pixelcode::mimo_capacity::{capacity_uniform, capacity_waterfilling, waterfill};
use pixelcode::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    InvalidModel = 5,
    SingularNetwork = 6,
    Infeasible = 7,
    Numerical = 8,
    Panic = 9,
}

/// Opaque pixel-antenna model.
pub struct PcModel {
    inner: PixelAntennaModel,
}

/// Opaque codebook of antenna coders.
pub struct PcCodebook {
    inner: Codebook,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> PcStatus {
    match err {
        Error::Parse { .. } => PcStatus::Parse,
        Error::Io(_) => PcStatus::Io,
        Error::ValidationFailed(_) | Error::DegenerateModel => PcStatus::InvalidModel,
        Error::SingularNetwork { .. } => PcStatus::SingularNetwork,
        Error::ZeroPattern { .. } | Error::ZeroPatternAt { .. } | Error::InfeasibleAll => PcStatus::Infeasible,
        Error::NonFinite(_) | Error::AllZeroEigenvalues => PcStatus::Numerical,
        Error::ModelLoad { source, .. } => status_of(source),
        _ => PcStatus::InvalidArgument,
    }
}

struct Failure(PcStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(PcStatus::InvalidArgument, message.into())
}

/// Runs `body`, records any failure and converts panics into `PC_STATUS_PANIC`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, Failure> {
    if ptr.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn coder_arg(bits: *const u8, q: usize) -> Result<AntennaCoder, Failure> {
    let raw = slice(bits, q, "bits")?;
    Ok(AntennaCoder::new(raw.to_vec())?)
}

fn read_complex(values: &[f64]) -> impl Iterator<Item = Complex64> + '_ {
    values.chunks_exact(2).map(|pair| Complex64::new(pair[0], pair[1]))
}

unsafe fn matrix_arg(data: *const f64, rows: usize, cols: usize) -> Result<CMatrix, Failure> {
    if rows == 0 || cols == 0 {
        return Err(invalid("matrix dimensions must be positive"));
    }
    let values: Vec<Complex64> = read_complex(slice(data, 2 * rows * cols, "matrix")?).collect();
    Ok(CMatrix::from_row_slice(rows, cols, &values))
}

fn write_complex(dst: &mut [f64], src: &CVector) {
    for (pair, z) in dst.chunks_exact_mut(2).zip(src.iter()) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL. Zero if no error has been recorded.
#[no_mangle]
pub extern "C" fn pc_last_error_length() -> usize {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message, NUL-terminated and truncated to fit, into
/// `buffer`. Returns the full message length.
///
/// # Safety
/// `buffer` must be valid for `capacity` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn pc_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let bytes = slot.as_ref().map_or(&[][..], |s| s.as_bytes());
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads and validates a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_model_load(path: *const c_char, out: *mut *mut PcModel) -> PcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = path_arg(path)?;
        let bytes = std::fs::read(path).map_err(Error::from)?;
        let inner = load_model(&bytes)?;
        *out = Box::into_raw(Box::new(PcModel { inner }));
        Ok(())
    })
}

/// Writes a model as JSON.
///
/// # Safety
/// `model` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pc_model_save(model: *const PcModel, path: *const c_char) -> PcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let path = path_arg(path)?;
        let bytes = save_model(&model.inner)?;
        std::fs::write(path, bytes).map_err(Error::from)?;
        Ok(())
    })
}

/// Builds a random, reciprocal, passive model with `q` switches over `k`
/// angles.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_model_synthesize(q: usize, k: usize, seed: u64, out: *mut *mut PcModel) -> PcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inner = synthesize_model(&SynthesisSpec::new(q, k, seed))?;
        *out = Box::into_raw(Box::new(PcModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_model_free(model: *mut PcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of switches and number of angle samples.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pc_model_dims(model: *const PcModel, q: *mut usize, k: *mut usize) -> PcStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        *out_ref(q, "q")? = model.q_switches();
        *out_ref(k, "k")? = model.k_angles();
        Ok(())
    })
}

/// Checks model invariants. Writes the number of violations; the return is
/// `PC_STATUS_INVALID_MODEL` with a description when there are any.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pc_model_validate(model: *const PcModel, violations: *mut usize) -> PcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let count = out_ref(violations, "violations")?;
        let report = validate_model(&model.inner);
        *count = report.violations.len();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Failure(PcStatus::InvalidModel, report.to_string()))
        }
    })
}

/// Port currents `[i_A, i_1 .. i_q]` for a unit feed current. `out` receives
/// `2 * (q + 1)` doubles.
///
/// # Safety
/// `bits` must hold `q` bytes and `out` room for `2 * (q + 1)` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_port_currents(
    model: *const PcModel,
    bits: *const u8,
    q: usize,
    out: *mut f64,
) -> PcStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        let coder = coder_arg(bits, q)?;
        let currents = port_currents(model, &coder, Complex64::new(1.0, 0.0))?;
        write_complex(slice_mut(out, 2 * currents.len(), "out")?, &currents);
        Ok(())
    })
}

/// Radiation pattern over `2k` polarization-angle samples. `out` receives
/// `4 * k` doubles.
///
/// # Safety
/// `bits` must hold `q` bytes and `out` room for `4 * k` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_radiation_pattern(
    model: *const PcModel,
    bits: *const u8,
    q: usize,
    normalize: bool,
    out: *mut f64,
) -> PcStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        let coder = coder_arg(bits, q)?;
        let pattern = radiation_pattern(model, &coder, normalize)?;
        write_complex(slice_mut(out, 2 * pattern.len(), "out")?, &pattern);
        Ok(())
    })
}

/// Effective number of degrees of freedom at the energy `threshold`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pc_eadof(model: *const PcModel, threshold: f64, out: *mut usize) -> PcStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        let out = out_ref(out, "out")?;
        *out = pattern_svd(model, threshold)?.eadof;
        Ok(())
    })
}

/// Capacity in bit/s/Hz with equal power per transmit stream.
///
/// # Safety
/// `h` must hold `2 * rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_capacity_uniform(
    h: *const f64,
    rows: usize,
    cols: usize,
    total_power: f64,
    noise: f64,
    out: *mut f64,
) -> PcStatus {
    guard(|| {
        let h = matrix_arg(h, rows, cols)?;
        let out = out_ref(out, "out")?;
        *out = capacity_uniform(&h, total_power, noise)?;
        Ok(())
    })
}

/// Capacity in bit/s/Hz with waterfilling over the channel eigenmodes.
///
/// # Safety
/// `h` must hold `2 * rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_capacity_waterfilling(
    h: *const f64,
    rows: usize,
    cols: usize,
    total_power: f64,
    noise: f64,
    out: *mut f64,
) -> PcStatus {
    guard(|| {
        let h = matrix_arg(h, rows, cols)?;
        let out = out_ref(out, "out")?;
        *out = capacity_waterfilling(&h, total_power, noise)?.0;
        Ok(())
    })
}

/// Waterfilling powers for `n` eigenvalues, in input order, plus the water
/// level.
///
/// # Safety
/// `eigenvalues` and `powers` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_waterfill(
    eigenvalues: *const f64,
    n: usize,
    total_power: f64,
    noise: f64,
    powers: *mut f64,
    water_level: *mut f64,
) -> PcStatus {
    guard(|| {
        let eig = slice(eigenvalues, n, "eigenvalues")?;
        let level = out_ref(water_level, "water_level")?;
        let dst = slice_mut(powers, n, "powers")?;
        let alloc = waterfill(eig, total_power, noise)?;
        dst.copy_from_slice(&alloc.powers);
        *level = alloc.water_level;
        Ok(())
    })
}

/// Loads a codebook JSON file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_codebook_load(path: *const c_char, out: *mut *mut PcCodebook) -> PcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = path_arg(path)?;
        let bytes = std::fs::read(path).map_err(Error::from)?;
        let inner = load_codebook(&bytes)?;
        *out = Box::into_raw(Box::new(PcCodebook { inner }));
        Ok(())
    })
}

/// # Safety
/// `codebook` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_codebook_free(codebook: *mut PcCodebook) {
    if !codebook.is_null() {
        drop(Box::from_raw(codebook));
    }
}

/// Number of coders in the codebook.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pc_codebook_len(codebook: *const PcCodebook, out: *mut usize) -> PcStatus {
    guard(|| {
        let codebook = deref(codebook, "codebook")?;
        *out_ref(out, "out")? = codebook.inner.len();
        Ok(())
    })
}

/// Picks the codebook entry with the highest gain for one channel.
/// `h_v` is the `2k x 2k` virtual channel and `e_t` the unit-norm transmit
/// pattern of length `2k`.
///
/// # Safety
/// `h_v` must hold `8 * k * k` doubles and `e_t` `4 * k` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_codebook_select(
    codebook: *const PcCodebook,
    model: *const PcModel,
    h_v: *const f64,
    e_t: *const f64,
    k: usize,
    index: *mut usize,
    gain: *mut f64,
) -> PcStatus {
    guard(|| {
        let codebook = &deref(codebook, "codebook")?.inner;
        let model = &deref(model, "model")?.inner;
        let index = out_ref(index, "index")?;
        let gain = out_ref(gain, "gain")?;
        let channel = VirtualChannel::new(matrix_arg(h_v, 2 * k, 2 * k)?)?;
        let transmit: Vec<Complex64> = read_complex(slice(e_t, 4 * k, "e_t")?).collect();
        let transmit = TransmitPattern::new(CVector::from_vec(transmit))?;
        let selection = select_coder(codebook, model, &channel, &transmit)?;
        *index = selection.index;
        *gain = selection.gain;
        Ok(())
    })
}
