//! C ABI for the Station engine.
//!
//! A run is an opaque [`StationHandle`] created from a manifest or a
//! snapshot and released with [`station_free`]. Every fallible call returns
//! a [`StationStatus`]; on failure, [`station_last_error`] describes what
//! went wrong on the calling thread. Strings returned by the library are
//! owned by the caller and must be released with [`station_string_free`].
//!
//! No call unwinds across the boundary: a panic inside the engine is caught
//! and reported as [`StationStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use station::agent::AgentId;
use station::capsules::CapsuleRoom;
use station::config::StationConfig;
use station::inspect::{self, View};
use station::kernel::{Station, StationError, StationOptions};
use station::persistence::{self, PersistError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The manifest could not be parsed or failed validation.
    InvalidManifest = 3,
    /// A backend could not be set up, or a slot names an unknown backend.
    Backend = 4,
    Io = 5,
    /// The run reached its tick limit.
    Halted = 6,
    Invariant = 7,
    CorruptSnapshot = 8,
    VersionMismatch = 9,
    /// An argument was out of range (for example an unknown view name).
    InvalidArgument = 10,
    Panic = 11,
}

/// Summary of one completed tick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StationTickInfo {
    pub tick: u64,
    pub wall: u64,
    /// Steps the clock was held for overdue evaluations.
    pub pause_steps: u32,
    /// Evaluation results delivered at the start of the tick.
    pub deliveries: u32,
    /// Turns that got no response from the backend.
    pub degraded_turns: u32,
    /// Departures plus spawns.
    pub lifecycle_events: u32,
}

/// Opaque run handle.
pub struct StationHandle {
    station: Station,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: StationStatus, msg: impl Into<String>) -> StationStatus {
    set_error(msg);
    status
}

fn station_status(e: &StationError) -> StationStatus {
    match e {
        StationError::Config(_) => StationStatus::InvalidManifest,
        StationError::Backend(_) | StationError::MissingBackend(_) => StationStatus::Backend,
        StationError::Io(_) => StationStatus::Io,
        StationError::Halted(_) => StationStatus::Halted,
        StationError::Invariant(_) => StationStatus::Invariant,
    }
}

fn persist_status(e: &PersistError) -> StationStatus {
    match e {
        PersistError::Io { .. } | PersistError::NotFound(_) => StationStatus::Io,
        PersistError::Version { .. } => StationStatus::VersionMismatch,
        PersistError::Corrupt(_) => StationStatus::CorruptSnapshot,
    }
}

/// Runs `f`, converting panics into `StationStatus::Panic`.
fn guard(f: impl FnOnce() -> StationStatus) -> StationStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == StationStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(StationStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, StationStatus> {
    if p.is_null() {
        return Err(fail(StationStatus::NullArgument, "required string argument is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(StationStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

unsafe fn read_opt_path(p: *const c_char) -> Result<Option<PathBuf>, StationStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        read_str(p).map(|s| Some(PathBuf::from(s)))
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Creates a run from TOML manifest text. `transcript_dir` may be null to
/// keep transcripts in memory (hash chain only).
///
/// # Safety
/// `manifest_toml` must be a valid NUL-terminated string; `transcript_dir`
/// must be null or a valid NUL-terminated string; `out` must be a valid
/// pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn station_new(
    manifest_toml: *const c_char,
    transcript_dir: *const c_char,
    out: *mut *mut StationHandle,
) -> StationStatus {
    guard(|| {
        if out.is_null() {
            return fail(StationStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = try_status!(read_str(manifest_toml));
        let dir = try_status!(read_opt_path(transcript_dir));
        let config = match StationConfig::from_toml_str(text) {
            Ok(c) => c,
            Err(e) => return fail(StationStatus::InvalidManifest, e.to_string()),
        };
        let opts = StationOptions {
            transcript_dir: dir,
            ..Default::default()
        };
        match Station::new(config, opts) {
            Ok(station) => {
                *out = Box::into_raw(Box::new(StationHandle { station }));
                StationStatus::Ok
            }
            Err(e) => fail(station_status(&e), e.to_string()),
        }
    })
}

/// Restores a run from a snapshot directory (or the newest snapshot under
/// it), continuing the transcript in `transcript_dir` (may be null).
///
/// # Safety
/// As for [`station_new`].
#[no_mangle]
pub unsafe extern "C" fn station_restore(
    snapshot_dir: *const c_char,
    transcript_dir: *const c_char,
    out: *mut *mut StationHandle,
) -> StationStatus {
    guard(|| {
        if out.is_null() {
            return fail(StationStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let snap = PathBuf::from(try_status!(read_str(snapshot_dir)));
        let dir = try_status!(read_opt_path(transcript_dir));
        let restored = match persistence::latest_snapshot(&snap).and_then(|d| persistence::read_snapshot(&d)) {
            Ok(r) => r,
            Err(e) => return fail(persist_status(&e), e.to_string()),
        };
        let opts = StationOptions {
            transcript_dir: dir,
            ..Default::default()
        };
        match Station::from_world(restored.config, restored.world, opts) {
            Ok(station) => {
                *out = Box::into_raw(Box::new(StationHandle { station }));
                StationStatus::Ok
            }
            Err(e) => fail(station_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a pointer returned by [`station_new`] or
/// [`station_restore`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn station_free(handle: *mut StationHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs one tick. `info` may be null.
///
/// # Safety
/// `handle` must be a live handle; `info` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn station_advance_tick(handle: *mut StationHandle, info: *mut StationTickInfo) -> StationStatus {
    guard(|| {
        let Some(h) = handle.as_mut() else {
            return fail(StationStatus::NullArgument, "handle is null");
        };
        match h.station.advance_tick() {
            Ok(r) => {
                if let Some(info) = info.as_mut() {
                    *info = StationTickInfo {
                        tick: r.tick,
                        wall: r.wall,
                        pause_steps: r.pause_steps,
                        deliveries: r.deliveries.len() as u32,
                        degraded_turns: r.turns.iter().filter(|t| t.degraded).count() as u32,
                        lifecycle_events: r.lifecycle.len() as u32,
                    };
                }
                StationStatus::Ok
            }
            Err(e) => fail(station_status(&e), e.to_string()),
        }
    })
}

/// Completed ticks so far, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn station_tick(handle: *const StationHandle) -> u64 {
    handle.as_ref().map_or(0, |h| h.station.world().tick)
}

/// Whether the next tick begins by holding the clock for an evaluation.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn station_gate_pending(handle: *const StationHandle) -> bool {
    handle.as_ref().is_some_and(|h| h.station.gate_pending())
}

/// Hex digest of the full world state; null on a null handle.
/// Release with [`station_string_free`].
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn station_digest(handle: *const StationHandle) -> *mut c_char {
    match handle.as_ref() {
        Some(h) => into_c_string(h.station.digest()),
        None => ptr::null_mut(),
    }
}

/// Hex head of the transcript hash chain; null on a null handle.
/// Release with [`station_string_free`].
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn station_transcript_head(handle: *const StationHandle) -> *mut c_char {
    match handle.as_ref() {
        Some(h) => into_c_string(h.station.transcript_head().digest.clone()),
        None => ptr::null_mut(),
    }
}

/// Writes a snapshot of the current state into `dir`.
///
/// # Safety
/// `handle` must be a live handle and `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn station_snapshot(handle: *const StationHandle, dir: *const c_char) -> StationStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            return fail(StationStatus::NullArgument, "handle is null");
        };
        let dir = PathBuf::from(try_status!(read_str(dir)));
        match persistence::write_snapshot(&dir, h.station.config(), h.station.world()) {
            Ok(_) => StationStatus::Ok,
            Err(e) => fail(persist_status(&e), e.to_string()),
        }
    })
}

/// Renders an operator view: `"status"`, `"agents"`, `"leaderboard"`, or
/// `"capsules:<private|public|archive|mail>"`. The text is stored in `*out`
/// and must be released with [`station_string_free`].
///
/// # Safety
/// `handle` must be a live handle, `view` a valid NUL-terminated string, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn station_inspect(
    handle: *const StationHandle,
    view: *const c_char,
    out: *mut *mut c_char,
) -> StationStatus {
    guard(|| {
        if out.is_null() {
            return fail(StationStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(h) = handle.as_ref() else {
            return fail(StationStatus::NullArgument, "handle is null");
        };
        let view = match try_status!(read_str(view)) {
            "status" => View::Status,
            "agents" => View::Agents,
            "leaderboard" => View::Leaderboard { agent: None, rows: 20 },
            "capsules:private" => View::Capsules(CapsuleRoom::PrivateMemory),
            "capsules:public" => View::Capsules(CapsuleRoom::PublicMemory),
            "capsules:archive" => View::Capsules(CapsuleRoom::Archive),
            "capsules:mail" => View::Capsules(CapsuleRoom::Mail),
            other => {
                if let Some(id) = other.strip_prefix("leaderboard:").and_then(|s| s.parse::<u64>().ok()) {
                    View::Leaderboard {
                        agent: Some(AgentId(id)),
                        rows: 20,
                    }
                } else {
                    return fail(StationStatus::InvalidArgument, format!("unknown view `{other}`"));
                }
            }
        };
        match inspect::render(h.station.world(), h.station.config(), view) {
            Ok(text) => {
                *out = into_c_string(text);
                StationStatus::Ok
            }
            Err(e) => fail(StationStatus::InvalidArgument, e),
        }
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn station_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn station_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
