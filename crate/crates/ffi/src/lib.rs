//! C ABI over the `qsig` simulator.
//!
//! States, attacks and reports cross the boundary as opaque handles, each
//! released with the matching `qsig_*_free`. Every fallible
//! call returns a [`QsigStatus`]; on failure the message is available through
//! [`qsig_last_error`] on the same thread. Panics are caught and reported as
//! [`QsigStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qsig::analysis::{mc_estimate, pb_exact, PassProbabilityReport};
use qsig::attacks::{probe_preset, AttackSpec, Side};
use qsig::cipher::Signature;
use qsig::protocol::{run_protocol, ProtocolConfig, Verdict};
use qsig::qcore::{BlochVector, QuantumState, C64};
use qsig::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsigStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    TooManyQubits = 4,
    InvalidState = 5,
    Parse = 6,
    Inconsistent = 7,
    Panic = 8,
}

/// Which qubit of a pair a single-side attack touches.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsigSide {
    Q = 0,
    S = 1,
}

/// A pure or mixed payload state.
pub struct QsigState(QuantumState);

/// An eavesdropper model.
pub struct QsigAttack(AttackSpec);

/// A pass-probability report.
pub struct QsigReport(PassProbabilityReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let clean = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> QsigStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => QsigStatus::DimensionMismatch,
        Error::TooManyQubits { .. } => QsigStatus::TooManyQubits,
        Error::NotNormalized(_)
        | Error::AmplitudesNotNormalized(_)
        | Error::InvalidDensity(_)
        | Error::NotPure
        | Error::NonUnitVector(_)
        | Error::NotUnitary(_) => QsigStatus::InvalidState,
        Error::Parse(_) => QsigStatus::Parse,
        Error::Inconsistent { .. } => QsigStatus::Inconsistent,
        _ => QsigStatus::InvalidArgument,
    }
}

struct Failure(QsigStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QsigStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QsigStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            QsigStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {message}"));
            QsigStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn set<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

unsafe fn bloch(p: *const f64, what: &str) -> Result<BlochVector, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let v = std::slice::from_raw_parts(p, 3);
    Ok(BlochVector::new(v[0], v[1], v[2])?)
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qsig_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns the full length including the terminator.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qsig_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Pure state from `len` amplitudes (`len` a power of two, unit norm).
///
/// # Safety
/// `re` and `im` must be valid for `len` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_state_from_amplitudes(
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut QsigState,
) -> QsigStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("amplitude array"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let amps = re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect();
        write_out(out, QsigState(QuantumState::from_amplitudes(amps)?))
    })
}

/// Computational basis state `|index>` on `n_qubits` qubits.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_state_basis(n_qubits: usize, index: usize, out: *mut *mut QsigState) -> QsigStatus {
    guard(|| write_out(out, QsigState(QuantumState::basis(n_qubits, index)?)))
}

/// Haar-random pure state drawn from a ChaCha8 stream seeded with `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_state_haar(n_qubits: usize, seed: u64, out: *mut *mut QsigState) -> QsigStatus {
    guard(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        write_out(out, QsigState(QuantumState::haar_random(n_qubits, &mut rng)?))
    })
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qsig_state_n_qubits(state: *const QsigState) -> usize {
    state.as_ref().map_or(0, |s| s.0.n_qubits())
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsig_state_free(state: *mut QsigState) {
    free(state)
}

/// Attack from its JSON description, e.g. `{"variant":"replace_random"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_from_json(json: *const c_char, out: *mut *mut QsigAttack) -> QsigStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(QsigStatus::Parse, e.to_string()))?;
        let spec: AttackSpec = serde_json::from_str(text).map_err(|e| Failure(QsigStatus::Parse, e.to_string()))?;
        // pair indices are checked against the payload at evaluation time
        spec.pair_kraus()?;
        write_out(out, QsigAttack(spec))
    })
}

/// Intercept/resend on one side of every pair. `measure` and `resend` are
/// unit Bloch vectors of three doubles.
///
/// # Safety
/// `measure` and `resend` must be valid for 3 reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_ir_single(
    side: QsigSide,
    measure: *const f64,
    resend: *const f64,
    out: *mut *mut QsigAttack,
) -> QsigStatus {
    guard(|| {
        let side = match side {
            QsigSide::Q => Side::Q,
            QsigSide::S => Side::S,
        };
        let spec = AttackSpec::ir_single(side, bloch(measure, "measure")?, bloch(resend, "resend")?);
        write_out(out, QsigAttack(spec))
    })
}

/// Intercept/resend on both qubits of every pair. `vectors` holds the
/// measure vectors on Q and S followed by the resend vectors on Q and S,
/// twelve doubles in all.
///
/// # Safety
/// `vectors` must be valid for 12 reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_ir_pair(vectors: *const f64, out: *mut *mut QsigAttack) -> QsigStatus {
    guard(|| {
        if vectors.is_null() {
            return Err(null("vectors"));
        }
        let v: Vec<BlochVector> = (0..4)
            .map(|k| bloch(vectors.add(3 * k), "vectors"))
            .collect::<Result<_, _>>()?;
        write_out(out, QsigAttack(AttackSpec::ir_pair(v[0], v[1], v[2], v[3])))
    })
}

/// Replacement of every pair by fresh random qubits.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_replace_random(out: *mut *mut QsigAttack) -> QsigStatus {
    guard(|| write_out(out, QsigAttack(AttackSpec::replace_random())))
}

/// Named probe-circuit topology, e.g. `"ancilla_swap_s"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_probe_preset(name: *const c_char, out: *mut *mut QsigAttack) -> QsigStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|e| Failure(QsigStatus::Parse, e.to_string()))?;
        write_out(out, QsigAttack(AttackSpec::probe(probe_preset(name)?)))
    })
}

/// # Safety
/// `attack` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsig_attack_free(attack: *mut QsigAttack) {
    free(attack)
}

unsafe fn signature(bits: *const u8, len: usize) -> Result<Option<Signature>, Failure> {
    if bits.is_null() {
        return Ok(None);
    }
    Ok(Some(Signature::new(std::slice::from_raw_parts(bits, len).to_vec())?))
}

/// Exact pass probability of `attack` on `state`. With a null `sig_bits`
/// the value is averaged over all signatures; otherwise `sig_len` bits
/// (0 or 1) fix it.
///
/// # Safety
/// Handles must be live; `sig_bits` must be null or valid for `sig_len`
/// reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_pb_exact(
    state: *const QsigState,
    attack: *const QsigAttack,
    sig_bits: *const u8,
    sig_len: usize,
    out: *mut *mut QsigReport,
) -> QsigStatus {
    guard(|| {
        let (state, attack) = (deref(state, "state")?, deref(attack, "attack")?);
        let sig = signature(sig_bits, sig_len)?;
        write_out(out, QsigReport(pb_exact(&state.0, sig.as_ref(), &attack.0)?))
    })
}

/// Monte Carlo pass probability over `trials` full protocol runs.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_mc_estimate(
    state: *const QsigState,
    attack: *const QsigAttack,
    trials: u64,
    seed: u64,
    out: *mut *mut QsigReport,
) -> QsigStatus {
    guard(|| {
        let (state, attack) = (deref(state, "state")?, deref(attack, "attack")?);
        write_out(out, QsigReport(mc_estimate(&state.0, None, &attack.0, trials, seed)?))
    })
}

/// # Safety
/// `report` must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_report_exact(report: *const QsigReport, value: *mut f64) -> QsigStatus {
    guard(|| set(value, deref(report, "report")?.0.exact, "value"))
}

/// Closed-form value; `present` is false when no closed form applies.
///
/// # Safety
/// `report` must be live; `value` and `present` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_report_closed_form(
    report: *const QsigReport,
    value: *mut f64,
    present: *mut bool,
) -> QsigStatus {
    guard(|| {
        let closed = deref(report, "report")?.0.closed_form;
        set(present, closed.is_some(), "present")?;
        set(value, closed.unwrap_or(f64::NAN), "value")
    })
}

/// Sampled mean, standard error and trial count; `present` is false for
/// reports without a Monte Carlo estimate.
///
/// # Safety
/// `report` must be live; all outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_report_mc(
    report: *const QsigReport,
    mean: *mut f64,
    std_error: *mut f64,
    trials: *mut u64,
    present: *mut bool,
) -> QsigStatus {
    guard(|| {
        let mc = deref(report, "report")?.0.mc_estimate;
        set(present, mc.is_some(), "present")?;
        set(mean, mc.as_ref().map_or(f64::NAN, |m| m.mean), "mean")?;
        set(std_error, mc.as_ref().map_or(f64::NAN, |m| m.stderr), "std_error")?;
        set(trials, mc.as_ref().map_or(0, |m| m.trials), "trials")
    })
}

/// Report as a JSON string, released with [`qsig_string_free`].
///
/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_report_to_json(report: *const QsigReport, out: *mut *mut c_char) -> QsigStatus {
    guard(|| {
        let text = serde_json::to_string(&deref(report, "report")?.0)
            .map_err(|e| Failure(QsigStatus::Parse, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Failure(QsigStatus::Parse, e.to_string()))?;
        set(out, c.into_raw(), "output pointer")
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsig_report_free(report: *mut QsigReport) {
    free(report)
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsig_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Honest protocol run on `state`. Writes whether Bob accepted and the
/// fidelity of his output (0 when aborted).
///
/// # Safety
/// `state` must be live; `delivered` and `fidelity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsig_roundtrip(
    state: *const QsigState,
    seed: u64,
    delivered: *mut bool,
    fidelity: *mut f64,
) -> QsigStatus {
    guard(|| {
        let state = deref(state, "state")?;
        let t = run_protocol(&state.0, &ProtocolConfig::new(state.0.n_qubits(), seed))?;
        set(delivered, t.verdict == Verdict::Delivered, "delivered")?;
        set(fidelity, t.fidelity.unwrap_or(0.0), "fidelity")
    })
}
