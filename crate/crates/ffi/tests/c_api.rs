use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use station_ffi::*;

const MANIFEST: &str = r#"
agent_count = 3
rng_seed = 11
max_ticks = 30
slots = ["hill", "forum", "mail"]

[backends.hill]
kind = "scripted"
behavior = "hill_climber"
params = { task = 1, n = 9 }

[backends.forum]
kind = "scripted"
behavior = "forum_poster"

[backends.mail]
kind = "scripted"
behavior = "mail_pinger"

[[task_specs]]
id = 1
title = "Circle packing"
description = "Pack 9 circles."
evaluator = { kind = "circle_packing", n = 9 }
logical_duration_ticks = 2
"#;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { station_string_free(s) };
    out
}

fn last_error() -> String {
    let p = station_last_error();
    assert!(!p.is_null(), "an error message is set");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_station(manifest: &str, transcript: Option<&Path>) -> *mut StationHandle {
    let m = c(manifest);
    let dir = transcript.map(|p| c(p.to_str().unwrap()));
    let mut h = ptr::null_mut();
    let status = unsafe { station_new(m.as_ptr(), dir.as_ref().map_or(ptr::null(), |d| d.as_ptr()), &mut h) };
    assert_eq!(status, StationStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    h
}

#[test]
fn runs_to_the_tick_limit_and_reports_halted() {
    let h = new_station(MANIFEST, None);
    let mut info = StationTickInfo::default();
    for t in 1..=30 {
        assert_eq!(unsafe { station_advance_tick(h, &mut info) }, StationStatus::Ok);
        assert_eq!(info.tick, t);
        assert!(info.wall >= t);
    }
    assert_eq!(unsafe { station_tick(h) }, 30);
    assert_eq!(
        unsafe { station_advance_tick(h, ptr::null_mut()) },
        StationStatus::Halted
    );
    assert!(last_error().contains("tick limit"));

    let mut text = ptr::null_mut();
    assert_eq!(
        unsafe { station_inspect(h, c("status").as_ptr(), &mut text) },
        StationStatus::Ok
    );
    assert!(take(text).starts_with("tick 30\n"));
    assert_eq!(
        unsafe { station_inspect(h, c("leaderboard").as_ptr(), &mut text) },
        StationStatus::Ok
    );
    assert!(take(text).contains("| id | task |"));
    assert_eq!(
        unsafe { station_inspect(h, c("weather").as_ptr(), &mut text) },
        StationStatus::InvalidArgument
    );
    assert!(text.is_null());
    unsafe { station_free(h) };
}

#[test]
fn identical_runs_agree_and_restore_continues_the_chain() {
    let a = new_station(MANIFEST, None);
    let tdir = tempfile::tempdir().unwrap();
    let b = new_station(MANIFEST, Some(tdir.path()));
    for _ in 0..12 {
        unsafe {
            assert_eq!(station_advance_tick(a, ptr::null_mut()), StationStatus::Ok);
            assert_eq!(station_advance_tick(b, ptr::null_mut()), StationStatus::Ok);
        }
    }
    assert_eq!(take(unsafe { station_digest(a) }), take(unsafe { station_digest(b) }));

    let snaps = tempfile::tempdir().unwrap();
    let snap = snaps.path().join("tick-000012");
    let snap_c = c(snap.to_str().unwrap());
    assert_eq!(unsafe { station_snapshot(b, snap_c.as_ptr()) }, StationStatus::Ok);
    unsafe { station_free(b) };

    let mut r = ptr::null_mut();
    let tdir_c = c(tdir.path().to_str().unwrap());
    assert_eq!(
        unsafe { station_restore(c(snaps.path().to_str().unwrap()).as_ptr(), tdir_c.as_ptr(), &mut r) },
        StationStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(unsafe { station_tick(r) }, 12);
    for _ in 0..8 {
        unsafe {
            assert_eq!(station_advance_tick(a, ptr::null_mut()), StationStatus::Ok);
            assert_eq!(station_advance_tick(r, ptr::null_mut()), StationStatus::Ok);
        }
    }
    assert_eq!(take(unsafe { station_digest(a) }), take(unsafe { station_digest(r) }));
    assert_eq!(
        take(unsafe { station_transcript_head(a) }),
        take(unsafe { station_transcript_head(r) })
    );
    unsafe {
        station_free(a);
        station_free(r);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(
            station_new(ptr::null(), ptr::null(), &mut h),
            StationStatus::NullArgument
        );
        assert_eq!(
            station_new(c(MANIFEST).as_ptr(), ptr::null(), ptr::null_mut()),
            StationStatus::NullArgument
        );
        assert_eq!(
            station_new(c("agent_count = 0").as_ptr(), ptr::null(), &mut h),
            StationStatus::InvalidManifest
        );
        assert!(h.is_null());
        assert!(last_error().contains("manifest"));

        let bad = [0x66u8, 0xff, 0x00];
        assert_eq!(
            station_new(bad.as_ptr().cast(), ptr::null(), &mut h),
            StationStatus::InvalidUtf8
        );
        assert_eq!(
            station_advance_tick(ptr::null_mut(), ptr::null_mut()),
            StationStatus::NullArgument
        );
        assert!(station_digest(ptr::null()).is_null());
        assert_eq!(station_tick(ptr::null()), 0);
        station_free(ptr::null_mut());
        station_string_free(ptr::null_mut());
    }

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("snapshot.json"), r#"{"version": 99}"#).unwrap();
    let p = c(dir.path().to_str().unwrap());
    assert_eq!(
        unsafe { station_restore(p.as_ptr(), ptr::null(), &mut h) },
        StationStatus::VersionMismatch
    );
    std::fs::write(dir.path().join("snapshot.json"), "{not json").unwrap();
    assert_eq!(
        unsafe { station_restore(p.as_ptr(), ptr::null(), &mut h) },
        StationStatus::CorruptSnapshot
    );
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(
        unsafe { station_restore(c(empty.path().to_str().unwrap()).as_ptr(), ptr::null(), &mut h) },
        StationStatus::Io
    );
    assert!(h.is_null());
}

#[test]
fn success_clears_the_last_error() {
    let mut h = ptr::null_mut();
    unsafe { station_new(ptr::null(), ptr::null(), &mut h) };
    assert!(!station_last_error().is_null());
    let h = new_station(MANIFEST, None);
    assert!(station_last_error().is_null());
    unsafe { station_free(h) };
}

/// The generated header must be valid C and C++ and declare the full API.
#[test]
fn header_compiles() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("station.h")).unwrap();
    for name in [
        "station_new",
        "station_restore",
        "station_free",
        "station_advance_tick",
        "station_tick",
        "station_gate_pending",
        "station_digest",
        "station_transcript_head",
        "station_snapshot",
        "station_inspect",
        "station_last_error",
        "station_string_free",
        "STATION_STATUS_CORRUPT_SNAPSHOT = 8",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "station.h"
int run(const char *manifest) {
    StationHandle *h = NULL;
    StationTickInfo info;
    if (station_new(manifest, NULL, &h) != STATION_STATUS_OK) return -1;
    while (station_advance_tick(h, &info) == STATION_STATUS_OK) {}
    char *d = station_digest(h);
    station_string_free(d);
    station_free(h);
    return (int)info.tick;
}
"#,
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let out = Command::new(compiler)
            .args(&extra)
            .args(["-Wall", "-Werror", "-fsyntax-only", "-I"])
            .arg(&include)
            .arg(&src)
            .output();
        match out {
            Ok(o) => assert!(
                o.status.success(),
                "{compiler} rejected the header:\n{}",
                String::from_utf8_lossy(&o.stderr)
            ),
            Err(e) => eprintln!("skipping {compiler} check: {e}"),
        }
    }
}
