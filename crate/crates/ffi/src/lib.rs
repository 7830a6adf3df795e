//! C ABI over `mokka`.
//!
//! Every fallible call returns a [`MokkaStatus`]; on failure the message is
//! available from [`mokka_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings handed out by a
//! handle live as long as the handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mokka::cli::{machine_report, Keyset};
use mokka::crypto::ClusterKeyring;
use mokka::proofs::{decode_proof, validate_proof, ProofPolicy, ValidationResult};
use mokka::simnet::{
    bundled, render_trace, run, scripted_partition_leadership, RunReport, Scenario,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MokkaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Crypto = 5,
    Simulation = 6,
    OutOfRange = 7,
    Panic = 99,
}

/// Outcome of proof validation. Mirrors the CLI's `verify` output.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MokkaValidation {
    Ok = 0,
    Expired = 1,
    BadSignature = 2,
    BadSecret = 3,
    UnknownVoter = 4,
    FutureTimestamp = 5,
}

impl From<ValidationResult> for MokkaValidation {
    fn from(r: ValidationResult) -> Self {
        match r {
            ValidationResult::Ok => MokkaValidation::Ok,
            ValidationResult::Expired => MokkaValidation::Expired,
            ValidationResult::BadSignature => MokkaValidation::BadSignature,
            ValidationResult::BadSecret => MokkaValidation::BadSecret,
            ValidationResult::UnknownVoter => MokkaValidation::UnknownVoter,
            ValidationResult::FutureTimestamp => MokkaValidation::FutureTimestamp,
        }
    }
}

/// Public keys of a cluster and its quorum combos.
pub struct MokkaKeyring {
    keyring: ClusterKeyring,
}

/// Result of one simulation run.
pub struct MokkaReport {
    report: RunReport,
    machine: CString,
    trace: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MokkaStatus, String);

impl Failure {
    fn new(status: MokkaStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MokkaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MokkaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MokkaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            MokkaStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(MokkaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_ptr<T>(out: *mut T) -> Result<&'static mut T, Failure> {
    // SAFETY: checked for null; the caller promises the pointer is writable.
    unsafe { out.as_mut() }
        .ok_or_else(|| Failure::new(MokkaStatus::NullPointer, "output pointer is null"))
}

fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes a live handle obtained from this library.
    unsafe { p.as_ref() }
        .ok_or_else(|| Failure::new(MokkaStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn mokka_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mokka_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Derives the deterministic keyring for `n` nodes from `seed`.
///
/// # Safety
/// `seed` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mokka_keyring_generate(
    seed: *const c_char,
    n: usize,
    out: *mut *mut MokkaKeyring,
) -> MokkaStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let seed = text(seed, "seed")?;
        let keyset =
            Keyset::generate(seed, n).map_err(|e| Failure::new(MokkaStatus::InvalidArgument, e))?;
        let keyring = keyset
            .keyring()
            .map_err(|e| Failure::new(MokkaStatus::Crypto, e))?;
        *out = Box::into_raw(Box::new(MokkaKeyring { keyring }));
        Ok(())
    })
}

/// Loads a keyring from keyset TOML as written by `mokka keys`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mokka_keyring_from_toml(
    toml: *const c_char,
    out: *mut *mut MokkaKeyring,
) -> MokkaStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let keyset = Keyset::from_toml(text(toml, "toml")?)
            .map_err(|e| Failure::new(MokkaStatus::Parse, e))?;
        let keyring = keyset
            .keyring()
            .map_err(|e| Failure::new(MokkaStatus::Crypto, e))?;
        *out = Box::into_raw(Box::new(MokkaKeyring { keyring }));
        Ok(())
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `keyring` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_keyring_nodes(keyring: *const MokkaKeyring) -> usize {
    keyring.as_ref().map_or(0, |k| k.keyring.len())
}

/// Quorum size, or 0 for a null handle.
///
/// # Safety
/// `keyring` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_keyring_quorum(keyring: *const MokkaKeyring) -> usize {
    keyring.as_ref().map_or(0, |k| k.keyring.quorum_size())
}

/// # Safety
/// `keyring` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mokka_keyring_free(keyring: *mut MokkaKeyring) {
    if !keyring.is_null() {
        drop(Box::from_raw(keyring));
    }
}

/// Decodes and validates an encoded proof at virtual time `now_ms`.
/// A rejected proof is not an error: the call returns `Ok` and writes the
/// verdict to `out`.
///
/// # Safety
/// `proof` must point to `len` readable bytes, `keyring` must be live and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mokka_proof_validate(
    keyring: *const MokkaKeyring,
    proof: *const u8,
    len: usize,
    now_ms: u64,
    ttl_ms: u64,
    max_clock_skew_ms: u64,
    out: *mut MokkaValidation,
) -> MokkaStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let keyring = handle(keyring, "keyring")?;
        if proof.is_null() {
            return Err(Failure::new(MokkaStatus::NullPointer, "proof is null"));
        }
        let policy = ProofPolicy {
            ttl_ms,
            max_clock_skew_ms,
        };
        policy
            .validate()
            .map_err(|e| Failure::new(MokkaStatus::InvalidArgument, e))?;
        let bytes = std::slice::from_raw_parts(proof, len);
        let decoded = decode_proof(bytes).map_err(|e| Failure::new(MokkaStatus::Parse, e))?;
        *out = validate_proof(&decoded, &keyring.keyring, &policy, now_ms).into();
        Ok(())
    })
}

/// Simulates a scenario given as TOML text, or by the name of a bundled
/// scenario.
///
/// # Safety
/// `scenario` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mokka_simulate(
    scenario: *const c_char,
    out: *mut *mut MokkaReport,
) -> MokkaStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let source = text(scenario, "scenario")?;
        let scenario = match bundled(source.trim()) {
            Some(s) => s,
            None => Scenario::from_toml(source).map_err(|e| Failure::new(MokkaStatus::Parse, e))?,
        };
        let (trace, report) =
            run(&scenario).map_err(|e| Failure::new(MokkaStatus::Simulation, e))?;
        let partitions = scripted_partition_leadership(&trace, &report);
        let to_c =
            |s: String| CString::new(s).map_err(|e| Failure::new(MokkaStatus::Simulation, e));
        let machine = to_c(machine_report(&report, &partitions))?;
        let trace = to_c(render_trace(&trace))?;
        *out = Box::into_raw(Box::new(MokkaReport {
            report,
            machine,
            trace,
        }));
        Ok(())
    })
}

/// Invariant violations found in the run.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_violations(report: *const MokkaReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.violations.len())
}

/// Number of terms that had a leader.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_leader_terms(report: *const MokkaReport) -> usize {
    report
        .as_ref()
        .map_or(0, |r| r.report.leaders_per_term.len())
}

/// Writes the leader every honest node followed at the end of the run.
/// Returns `OutOfRange` when the cluster ended without a single leader.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_final_leader(
    report: *const MokkaReport,
    out: *mut u16,
) -> MokkaStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let report = handle(report, "report")?;
        let leader = report.report.final_leader().ok_or_else(|| {
            Failure::new(
                MokkaStatus::OutOfRange,
                "no single leader at the end of the run",
            )
        })?;
        *out = leader.0;
        Ok(())
    })
}

/// Tab-separated machine report, the same text as `mokka run --machine`.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_machine(report: *const MokkaReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.machine.as_ptr())
}

/// Full event trace, one event per line.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_trace(report: *const MokkaReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.trace.as_ptr())
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mokka_report_free(report: *mut MokkaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
