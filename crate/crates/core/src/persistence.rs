//! Snapshots, restore, and the human-readable export bundle.
//!
//! A snapshot is a directory:
//!
//! ```text
//! snapshot.json   format version, tick, manifest, world state, storage index, digest
//! storage/        the shared storage tree, one file per stored path
//! ```
//!
//! Restore reads the tree back, checks every file against the index, and
//! recomputes the world digest; any mismatch is reported as corruption
//! rather than silently repaired.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::capsules::{Capsule, CapsuleRoom, CapsuleStatus};
use crate::config::StationConfig;
use crate::kernel::{world_digest, World};
use crate::research::storage::StoredFile;
use crate::research::Storage;

pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error("no snapshots under {0}")]
    NotFound(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    version: u32,
    tick: u64,
    digest: String,
    config: StationConfig,
    storage_quota: u64,
    storage: BTreeMap<String, (String, u64)>,
    world: World,
}

/// A restored run: the manifest it was started with and its state.
#[derive(Debug)]
pub struct Restored {
    pub config: StationConfig,
    pub world: World,
    pub digest: String,
}

/// Writes a snapshot of `world` into `dir` (replacing any previous content).
/// Returns the world digest recorded in it.
pub fn write_snapshot(dir: &Path, config: &StationConfig, world: &World) -> Result<String, PersistError> {
    let staging = dir.with_extension("partial");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let storage_dir = staging.join("storage");
    fs::create_dir_all(&storage_dir).map_err(io_err(&storage_dir))?;
    for (path, file) in world.storage.files() {
        let target = storage_dir.join(path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&target, &file.content).map_err(io_err(&target))?;
    }
    let digest = world_digest(world);
    let snap = SnapshotFile {
        version: SNAPSHOT_VERSION,
        tick: world.tick,
        digest: digest.clone(),
        config: config.clone(),
        storage_quota: world.storage.quota_bytes,
        storage: world.storage.index(),
        world: world.clone(),
    };
    let json = serde_json::to_vec(&snap).map_err(|e| PersistError::Corrupt(e.to_string()))?;
    let file = staging.join(SNAPSHOT_FILE);
    fs::write(&file, json).map_err(io_err(&file))?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&staging, dir).map_err(io_err(dir))?;
    Ok(digest)
}

/// Reads a snapshot directory back into a world.
pub fn read_snapshot(dir: &Path) -> Result<Restored, PersistError> {
    let file = dir.join(SNAPSHOT_FILE);
    let bytes = fs::read(&file).map_err(io_err(&file))?;
    let raw: Value =
        serde_json::from_slice(&bytes).map_err(|e| PersistError::Corrupt(format!("{SNAPSHOT_FILE}: {e}")))?;
    let version = raw
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| PersistError::Corrupt("missing format version".into()))?;
    if version != u64::from(SNAPSHOT_VERSION) {
        return Err(PersistError::Version {
            found: version as u32,
            expected: SNAPSHOT_VERSION,
        });
    }
    let snap: SnapshotFile =
        serde_json::from_value(raw).map_err(|e| PersistError::Corrupt(format!("{SNAPSHOT_FILE}: {e}")))?;

    let mut files = BTreeMap::new();
    for (path, (digest, modified_tick)) in &snap.storage {
        let target = dir.join("storage").join(path);
        let content =
            fs::read_to_string(&target).map_err(|e| PersistError::Corrupt(format!("storage file `{path}`: {e}")))?;
        if Storage::digest_of(&content) != *digest {
            return Err(PersistError::Corrupt(format!(
                "storage file `{path}` does not match its digest"
            )));
        }
        files.insert(
            path.clone(),
            StoredFile {
                content,
                modified_tick: *modified_tick,
            },
        );
    }
    let mut world = snap.world;
    world.storage = Storage::from_parts(snap.storage_quota, files);
    let digest = world_digest(&world);
    if digest != snap.digest {
        return Err(PersistError::Corrupt(format!(
            "state digest {digest} does not match the recorded {}",
            snap.digest
        )));
    }
    if world.tick != snap.tick {
        return Err(PersistError::Corrupt("tick does not match the recorded tick".into()));
    }
    Ok(Restored {
        config: snap.config,
        world,
        digest,
    })
}

/// Directory name for the snapshot taken after `tick`.
pub fn snapshot_name(tick: u64) -> String {
    format!("tick-{tick:06}")
}

/// The snapshot with the highest tick under `root`, or `root` itself when
/// it is a snapshot directory.
pub fn latest_snapshot(root: &Path) -> Result<PathBuf, PersistError> {
    if root.join(SNAPSHOT_FILE).is_file() {
        return Ok(root.to_path_buf());
    }
    let entries = fs::read_dir(root).map_err(io_err(root))?;
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(io_err(root))?.path();
        let tick = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("tick-"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(t) = tick {
            if path.join(SNAPSHOT_FILE).is_file() && best.as_ref().is_none_or(|b| t > b.0) {
                best = Some((t, path));
            }
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| PersistError::NotFound(root.to_path_buf()))
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    out.truncate(48);
    out.trim_matches('-').to_string()
}

fn render_capsule(c: &Capsule) -> String {
    let mut out = format!("# {}\n\n", c.title);
    out.push_str(&format!(
        "Capsule #{} by {}, created at tick {}, status {:?}.\n",
        c.id, c.author.name, c.created_tick, c.status
    ));
    if !c.tags.is_empty() {
        out.push_str(&format!("Tags: {}\n", c.tags.join(", ")));
    }
    if let Some(a) = &c.abstract_text {
        out.push_str(&format!("\n## Abstract\n\n{a}\n"));
    }
    if let Some(r) = &c.review {
        out.push_str(&format!(
            "\n## Review (tick {})\n\n{}: {}\n",
            r.tick,
            if r.accepted { "Accepted" } else { "Rejected" },
            r.rationale
        ));
    }
    for m in c.live_messages() {
        out.push_str(&format!(
            "\n## {} — {} (tick {})\n\n{}\n",
            c.message_id(m.index),
            m.author.name,
            m.created_tick,
            m.content
        ));
    }
    out
}

fn dialogue_markdown(path: &Path) -> io::Result<String> {
    let mut out = String::new();
    for line in fs::read_to_string(path)?.lines() {
        let Ok(v) = serde_json::from_str::<Value>(line) else {
            continue;
        };
        let r = &v["record"];
        let tick = r["tick"].as_u64().unwrap_or(0);
        match r["type"].as_str() {
            Some("spawned") => out.push_str(&format!("# Spawned at tick {tick} (slot {})\n\n", r["slot"])),
            Some("turn") | Some("reflection") => {
                let label = if r["type"] == "turn" {
                    format!("Turn at tick {tick}")
                } else {
                    format!("Reflection {}/{} at tick {tick}", r["k"], r["n"])
                };
                out.push_str(&format!(
                    "## {label}\n\n### Prompt\n\n```\n{}\n```\n\n### Response\n\n```\n{}\n```\n\n",
                    r["prompt"].as_str().unwrap_or_default(),
                    r["response"].as_str().unwrap_or_default()
                ));
            }
            Some("degraded") => out.push_str(&format!(
                "## Turn at tick {tick} (no response: {})\n\n",
                r["error"].as_str().unwrap_or_default()
            )),
            Some("departed") => out.push_str(&format!("# Departed at tick {tick} ({})\n", r["reason"])),
            _ => {}
        }
    }
    Ok(out)
}

/// Writes a browsable bundle: per-agent dialogues (from the transcript, when
/// available), archive papers, and public forum threads.
pub fn export(world: &World, transcript: Option<&Path>, out: &Path) -> Result<usize, PersistError> {
    let mut written = 0;
    let mut write = |path: PathBuf, content: String| -> Result<(), PersistError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, content).map_err(io_err(&path))?;
        written += 1;
        Ok(())
    };

    let mut index = String::from("# Station export\n\n");
    index.push_str(&format!("Completed ticks: {}\n\n## Agents\n\n", world.tick));
    let live = world.agents.values().map(|a| (a, "live".to_string()));
    let gone = world
        .departed
        .iter()
        .map(|d| (&d.record, format!("departed at tick {} ({:?})", d.tick, d.reason)));
    for (a, state) in live.chain(gone) {
        index.push_str(&format!(
            "- agent {}: {} (backend {}, spawned tick {}, {} tokens used, {state})\n",
            a.id.0,
            a.display_name(),
            a.backend_id,
            a.spawned_tick,
            a.ledger.used()
        ));
    }

    if let Some(dir) = transcript {
        let agents = dir.join("agents");
        if agents.is_dir() {
            for entry in fs::read_dir(&agents).map_err(io_err(&agents))? {
                let path = entry.map_err(io_err(&agents))?.path();
                let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                    continue;
                };
                let md = dialogue_markdown(&path).map_err(io_err(&path))?;
                write(out.join("dialogues").join(format!("agent-{stem}.md")), md)?;
            }
        }
    }

    index.push_str("\n## Archive\n\n");
    for c in world.capsules.all(CapsuleRoom::Archive) {
        if c.status == CapsuleStatus::Deleted {
            continue;
        }
        let name = format!("{:04}-{}.md", c.id, slug(&c.title));
        index.push_str(&format!("- [{}](archive/{name}) ({:?})\n", c.title, c.status));
        write(out.join("archive").join(&name), render_capsule(c))?;
    }
    index.push_str("\n## Public forum\n\n");
    for c in world.capsules.all(CapsuleRoom::PublicMemory) {
        if c.status == CapsuleStatus::Deleted {
            continue;
        }
        let name = format!("{:04}-{}.md", c.id, slug(&c.title));
        index.push_str(&format!("- [{}](forum/{name})\n", c.title));
        write(out.join("forum").join(&name), render_capsule(c))?;
    }
    write(out.join("README.md"), index)?;
    Ok(written)
}
