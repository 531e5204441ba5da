//! End-to-end runs: snapshots, export bundles, and the `station` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use station::capsules::{CapsuleRoom, CapsuleStatus};
use station::persistence::{self, PersistError};

use common::{config, plain, SCRIPTED};

/// The scripted run with an early maturity so papers reach the archive.
fn early_maturity() -> String {
    SCRIPTED.replace(
        "max_ticks = 200\n",
        "max_ticks = 200\nmaturity_age_ticks = 5\nseed_storage = { \"shared/readme.txt\" = \"welcome\\n\" }\n",
    )
}

#[test]
fn export_bundle_holds_accepted_papers_verbatim() {
    let cfg = config(&early_maturity());
    let transcript = tempfile::tempdir().unwrap();
    let mut st = plain(&cfg, Some(transcript.path()));
    for _ in 0..60 {
        st.advance_tick().unwrap();
    }
    let accepted: Vec<_> = st
        .world()
        .capsules
        .all(CapsuleRoom::Archive)
        .filter(|c| c.status == CapsuleStatus::Accepted)
        .cloned()
        .collect();
    assert!(!accepted.is_empty(), "the forum poster had a paper accepted");

    let out = tempfile::tempdir().unwrap();
    let written = persistence::export(st.world(), Some(transcript.path()), out.path()).unwrap();
    assert!(written > accepted.len());
    let index = fs::read_to_string(out.path().join("README.md")).unwrap();
    for c in &accepted {
        let file = fs::read_dir(out.path().join("archive"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| {
                p.file_name()
                    .unwrap()
                    .to_str()
                    .unwrap()
                    .starts_with(&format!("{:04}-", c.id))
            })
            .expect("accepted paper exported");
        let text = fs::read_to_string(file).unwrap();
        assert!(text.contains(&c.title));
        assert!(text.contains(c.abstract_text.as_deref().unwrap()));
        for m in c.live_messages() {
            assert!(text.contains(&m.content), "paper {} content is verbatim", c.id);
        }
        assert!(index.contains(&c.title));
    }
    let dialogues = fs::read_dir(out.path().join("dialogues")).unwrap().count();
    assert!(dialogues >= 5, "one dialogue per agent that ever lived");
}

#[test]
fn snapshots_reject_tampering_and_unknown_versions() {
    let cfg = config(&early_maturity());
    let mut st = plain(&cfg, None);
    for _ in 0..8 {
        st.advance_tick().unwrap();
    }
    let root = tempfile::tempdir().unwrap();
    let early = root.path().join(persistence::snapshot_name(8));
    let digest = persistence::write_snapshot(&early, st.config(), st.world()).unwrap();
    assert_eq!(digest, st.digest());
    for _ in 0..4 {
        st.advance_tick().unwrap();
    }
    let late = root.path().join(persistence::snapshot_name(12));
    persistence::write_snapshot(&late, st.config(), st.world()).unwrap();
    assert_eq!(persistence::latest_snapshot(root.path()).unwrap(), late);
    assert_eq!(persistence::latest_snapshot(&early).unwrap(), early);

    let restored = persistence::read_snapshot(&late).unwrap();
    assert_eq!(restored.world, *st.world());
    assert_eq!(restored.config, *st.config());

    let copy = |name: &str| {
        let dir = root.path().join(name);
        copy_dir(&late, &dir);
        dir
    };

    let storage = copy("storage");
    fs::write(storage.join("storage/shared/readme.txt"), "edited\n").unwrap();
    assert!(matches!(
        persistence::read_snapshot(&storage),
        Err(PersistError::Corrupt(_))
    ));
    fs::remove_file(storage.join("storage/shared/readme.txt")).unwrap();
    assert!(matches!(
        persistence::read_snapshot(&storage),
        Err(PersistError::Corrupt(_))
    ));

    let state = copy("state");
    let file = state.join(persistence::SNAPSHOT_FILE);
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    json["world"]["wall"] = serde_json::json!(9999);
    fs::write(&file, json.to_string()).unwrap();
    assert!(matches!(
        persistence::read_snapshot(&state),
        Err(PersistError::Corrupt(_))
    ));

    json["version"] = serde_json::json!(2);
    fs::write(&file, json.to_string()).unwrap();
    assert!(matches!(
        persistence::read_snapshot(&state),
        Err(PersistError::Version { found: 2, expected: 1 })
    ));
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn station_cmd(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_station"));
    cmd.current_dir(dir).env("STATION_LOG", "warn");
    cmd
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{cmd:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn cli_runs_resumes_inspects_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), early_maturity()).unwrap();

    let first = run_ok(station_cmd(dir.path()).args(["run", "-m", "run.toml", "--max-ticks", "20", "-q"]));
    assert!(first.contains("stopped after tick 20"), "{first}");
    let snapshots = dir.path().join("station-run/snapshots");
    assert!(snapshots
        .join(persistence::snapshot_name(20))
        .join("snapshot.json")
        .is_file());

    let second = run_ok(station_cmd(dir.path()).args(["resume", "-s", "station-run/snapshots", "--max-ticks", "30"]));
    assert!(second.contains("tick 30 (wall"), "{second}");
    assert!(second.contains("stopped after tick 30"));

    let status = run_ok(station_cmd(dir.path()).args(["inspect", "-s", "station-run/snapshots", "status"]));
    assert!(status.starts_with("tick 30\n"), "{status}");
    let agents = run_ok(station_cmd(dir.path()).args(["inspect", "-s", "station-run/snapshots", "agents"]));
    assert_eq!(agents.lines().filter(|l| l.contains(" | ")).count(), 6, "{agents}");
    let board =
        run_ok(station_cmd(dir.path()).args(["inspect", "-s", "station-run/snapshots", "leaderboard", "--rows", "3"]));
    assert!(board.contains("| id | task |"), "{board}");

    let verified = run_ok(station_cmd(dir.path()).args(["verify"]));
    let head = second.rsplit("transcript head ").next().unwrap();
    let digest = head.split_whitespace().next().unwrap();
    assert!(verified.contains(digest), "verify {verified} vs run {second}");

    run_ok(station_cmd(dir.path()).args(["export", "-s", "station-run/snapshots", "-o", "bundle"]));
    assert!(dir.path().join("bundle/README.md").is_file());
    assert!(dir.path().join("bundle/dialogues").is_dir());
}

#[test]
fn cli_exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "agent_count = 0\n").unwrap();
    let out = station_cmd(dir.path())
        .args(["run", "-m", "bad.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let snap = dir.path().join("snap");
    fs::create_dir(&snap).unwrap();
    fs::write(snap.join("snapshot.json"), r#"{"version": 7}"#).unwrap();
    let out = station_cmd(dir.path())
        .args(["inspect", "-s", "snap", "status"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    fs::write(snap.join("snapshot.json"), "{").unwrap();
    let out = station_cmd(dir.path())
        .args(["inspect", "-s", "snap", "status"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}
