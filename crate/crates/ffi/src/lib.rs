// SPDX-License-Identifier: Apache-2.0

//! C ABI over `cpulse`. Every fallible call returns a [`CpStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`cp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cpulse::maps::{scan_with, Grid, RobustnessMap, ScanOptions};
use cpulse::pulses::{base_propagator, ErrorModel, IntegratorConfig, PulseShape, PulseSpec};
use cpulse::sequences::{catalog, execute_with_offsets, CompositeSequence};
use cpulse::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    UnknownLabel = 3,
    Parse = 4,
    Io = 5,
    Integration = 6,
    Conditioning = 7,
    Precision = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpShape {
    Rectangular = 0,
    Gaussian = 1,
}

/// Single pulse: envelope, peak Rabi frequency and nominal area.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpPulse {
    pub shape: CpShape,
    pub omega: f64,
    pub area: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpErrorModel {
    pub amplitude_scale: f64,
    pub static_detuning: f64,
    pub chirp_rate: f64,
    pub stark_coefficient: f64,
    pub phase_jitter_std: f64,
}

/// Stückelberg parameters of a propagator.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpPropagator {
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Opaque composite sequence.
pub struct CpSequence(CompositeSequence);

/// Opaque robustness map.
pub struct CpMap(RobustnessMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CpStatus {
    match err {
        Error::Domain(_) => CpStatus::Domain,
        Error::UnknownLabel { .. } => CpStatus::UnknownLabel,
        Error::Parse(_) => CpStatus::Parse,
        Error::Io(_) => CpStatus::Io,
        Error::Integration { .. } => CpStatus::Integration,
        Error::Conditioning { .. } => CpStatus::Conditioning,
        Error::Precision(_) => CpStatus::Precision,
    }
}

fn fail(status: CpStatus, msg: impl Into<String>) -> CpStatus {
    set_error(msg.into());
    status
}

fn guard<F: FnOnce() -> Result<(), CpStatus>>(f: F) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(CpStatus::Panic, "internal panic"),
    }
}

fn core<T>(r: cpulse::Result<T>) -> Result<T, CpStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, CpStatus> {
    // SAFETY: the caller promises `p` is null or points to a live `T`.
    unsafe { p.as_ref() }.ok_or_else(|| fail(CpStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<*mut T, CpStatus> {
    if p.is_null() {
        Err(fail(CpStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(p)
    }
}

fn to_spec(p: &CpPulse) -> Result<PulseSpec, CpStatus> {
    let shape = match p.shape {
        CpShape::Rectangular => PulseShape::Rectangular,
        CpShape::Gaussian => PulseShape::Gaussian,
    };
    core(PulseSpec::with_area(shape, p.omega, p.area))
}

fn to_errors(e: &CpErrorModel) -> Result<ErrorModel, CpStatus> {
    let m = ErrorModel {
        amplitude_scale: e.amplitude_scale,
        static_detuning: e.static_detuning,
        chirp_rate: e.chirp_rate,
        stark_coefficient: e.stark_coefficient,
        phase_jitter_std: e.phase_jitter_std,
    };
    core(m.validate())?;
    Ok(m)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Nominal error model: unit amplitude, all other deviations zero.
#[no_mangle]
pub extern "C" fn cp_error_model_default() -> CpErrorModel {
    let d = ErrorModel::default();
    CpErrorModel {
        amplitude_scale: d.amplitude_scale,
        static_detuning: d.static_detuning,
        chirp_rate: d.chirp_rate,
        stark_coefficient: d.stark_coefficient,
        phase_jitter_std: d.phase_jitter_std,
    }
}

/// Looks up a catalog entry (`"single"` gives one bare pulse).
///
/// # Safety
/// `label` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_sequence_catalog(label: *const c_char, out: *mut *mut CpSequence) -> CpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if label.is_null() {
            return Err(fail(CpStatus::NullPointer, "label is null"));
        }
        let label = CStr::from_ptr(label)
            .to_str()
            .map_err(|_| fail(CpStatus::Parse, "label is not UTF-8"))?;
        let seq = if label.eq_ignore_ascii_case("single") {
            CompositeSequence::single()
        } else {
            core(catalog(label))?
        };
        *out = Box::into_raw(Box::new(CpSequence(seq)));
        Ok(())
    })
}

/// Builds a sequence from `len` phases in radians.
///
/// # Safety
/// `phases` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_sequence_from_phases(phases: *const f64, len: usize, out: *mut *mut CpSequence) -> CpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if phases.is_null() {
            return Err(fail(CpStatus::NullPointer, "phases is null"));
        }
        let v = std::slice::from_raw_parts(phases, len).to_vec();
        let seq = core(CompositeSequence::new("custom", v, 0))?;
        *out = Box::into_raw(Box::new(CpSequence(seq)));
        Ok(())
    })
}

/// Number of pulses, 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_sequence_len(seq: *const CpSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the phases (radians) into `buf`, which holds `cap` doubles.
///
/// # Safety
/// `seq` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cp_sequence_phases(seq: *const CpSequence, buf: *mut f64, cap: usize) -> CpStatus {
    guard(|| {
        let seq = non_null(seq, "seq")?;
        let buf = out_ptr(buf, "buf")?;
        let phases = &seq.0.phases;
        if cap < phases.len() {
            return Err(fail(CpStatus::BufferTooSmall, format!("need {} doubles", phases.len())));
        }
        std::ptr::copy_nonoverlapping(phases.as_ptr(), buf, phases.len());
        Ok(())
    })
}

/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_sequence_free(seq: *mut CpSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Composes the sequence and writes its propagator.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_execute(
    seq: *const CpSequence,
    pulse: *const CpPulse,
    errors: *const CpErrorModel,
    seed: u64,
    out: *mut CpPropagator,
) -> CpStatus {
    guard(|| {
        let seq = &non_null(seq, "seq")?.0;
        let spec = to_spec(non_null(pulse, "pulse")?)?;
        let err = to_errors(non_null(errors, "errors")?)?;
        let out = out_ptr(out, "out")?;
        let base = core(base_propagator(&spec, &err, &IntegratorConfig::default()))?;
        let u = core(execute_with_offsets(seq, &base, &err.jitter_offsets(seq.len(), seed)))?;
        *out = CpPropagator {
            q: u.q(),
            alpha: u.alpha(),
            beta: u.beta(),
        };
        Ok(())
    })
}

/// Infidelity `Q = |U11|²` of the composed sequence.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_infidelity(
    seq: *const CpSequence,
    pulse: *const CpPulse,
    errors: *const CpErrorModel,
    seed: u64,
    out: *mut f64,
) -> CpStatus {
    let mut u = CpPropagator::default();
    let status = cp_execute(seq, pulse, errors, seed, &mut u);
    if status == CpStatus::Ok {
        if out.is_null() {
            return fail(CpStatus::NullPointer, "out is null");
        }
        *out = u.q * u.q;
    }
    status
}

/// Infidelity map over `Δ/Ω ∈ [dmin, dmax]` (columns) and `T/τ ∈ [tmin, tmax]`
/// (rows). Failed cells hold -1.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cp_scan(
    seq: *const CpSequence,
    pulse: *const CpPulse,
    errors: *const CpErrorModel,
    dmin: f64,
    dmax: f64,
    tmin: f64,
    tmax: f64,
    n_detuning: usize,
    n_duration: usize,
    seed: u64,
    out: *mut *mut CpMap,
) -> CpStatus {
    guard(|| {
        let seq = &non_null(seq, "seq")?.0;
        let spec = to_spec(non_null(pulse, "pulse")?)?;
        let err = to_errors(non_null(errors, "errors")?)?;
        let out = out_ptr(out, "out")?;
        let grid = Grid {
            detuning: (dmin, dmax),
            duration: (tmin, tmax),
            resolution: (n_detuning, n_duration),
        };
        let opts = ScanOptions {
            seed,
            ..ScanOptions::default()
        };
        let map = core(scan_with(seq, &spec, &err, &grid, &opts))?;
        *out = Box::into_raw(Box::new(CpMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_map_rows(map: *const CpMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_map_cols(map: *const CpMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the values row-major into `buf` of `cap` doubles.
///
/// # Safety
/// `map` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cp_map_values(map: *const CpMap, buf: *mut f64, cap: usize) -> CpStatus {
    guard(|| {
        let map = &non_null(map, "map")?.0;
        let buf = out_ptr(buf, "buf")?;
        let need = map.rows() * map.cols();
        if cap < need {
            return Err(fail(CpStatus::BufferTooSmall, format!("need {need} doubles")));
        }
        for (i, v) in map.values.iter().flatten().enumerate() {
            *buf.add(i) = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_map_free(map: *mut CpMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
