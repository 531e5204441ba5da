//! Append-only JSONL transcripts with a running hash chain.
//!
//! Every record is hashed as `sha256(previous_head || canonical_json)`,
//! where canonical JSON is `serde_json`'s compact rendering of a `Value`
//! (object keys sorted). The head lives in [`World`](super::World), so two
//! runs agree on the head exactly when they emitted the same records in the
//! same order, and a snapshot carries enough to continue the chain.
//!
//! Layout of a transcript directory:
//!
//! ```text
//! ticks.jsonl          one record per agent turn, pause step, and tick summary
//! agents/<id>.jsonl    per-agent dialogue: prompt, response, parse, results
//! reviewer.jsonl       the archive reviewer's dialogue
//! outbox.jsonl         messages left for the operators
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::world::TranscriptHead;
use crate::agent::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Ticks,
    Agent(AgentId),
    Reviewer,
    Outbox,
}

impl Stream {
    fn relative(self) -> PathBuf {
        match self {
            Stream::Ticks => "ticks.jsonl".into(),
            Stream::Agent(id) => PathBuf::from("agents").join(format!("{}.jsonl", id.0)),
            Stream::Reviewer => "reviewer.jsonl".into(),
            Stream::Outbox => "outbox.jsonl".into(),
        }
    }
}

/// Next chain head after appending `record`.
pub fn chain(prev: &str, record: &Value) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(record.to_string().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct Line<'a> {
    n: u64,
    hash: &'a str,
    record: &'a Value,
}

/// Writes records to disk (when a directory is configured) and always
/// advances the hash chain.
#[derive(Debug, Default)]
pub struct TranscriptSink {
    dir: Option<PathBuf>,
}

impl TranscriptSink {
    pub fn memory() -> Self {
        Self { dir: None }
    }

    /// Opens `dir`, dropping any lines numbered above `keep_through` (left
    /// behind by a run that continued past the snapshot being resumed).
    pub fn open(dir: &Path, keep_through: u64) -> io::Result<Self> {
        fs::create_dir_all(dir.join("agents"))?;
        let mut files = vec![
            dir.join("ticks.jsonl"),
            dir.join("reviewer.jsonl"),
            dir.join("outbox.jsonl"),
        ];
        for entry in fs::read_dir(dir.join("agents"))? {
            files.push(entry?.path());
        }
        for path in files.into_iter().filter(|p| p.is_file()) {
            truncate_after(&path, keep_through)?;
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn append<T: Serialize>(&mut self, head: &mut TranscriptHead, stream: Stream, record: &T) -> io::Result<()> {
        let value = serde_json::to_value(record).map_err(io::Error::other)?;
        head.digest = chain(&head.digest, &value);
        head.records += 1;
        if let Some(dir) = &self.dir {
            let path = dir.join(stream.relative());
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&Line {
                n: head.records,
                hash: &head.digest,
                record: &value,
            })
            .map_err(io::Error::other)?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn truncate_after(path: &Path, keep_through: u64) -> io::Result<()> {
    let reader = BufReader::new(File::open(path)?);
    let mut kept = String::new();
    let mut dropped = false;
    for line in reader.lines() {
        let line = line?;
        let n = serde_json::from_str::<Value>(&line)
            .ok()
            .and_then(|v| v.get("n").and_then(Value::as_u64));
        match n {
            Some(n) if n <= keep_through => {
                kept.push_str(&line);
                kept.push('\n');
            }
            _ => dropped = true,
        }
    }
    if dropped {
        fs::write(path, kept)?;
    }
    Ok(())
}

/// Recomputes the chain over a transcript directory, returning the head.
/// Lines from all streams are merged by their sequence number.
pub fn verify_dir(dir: &Path) -> io::Result<TranscriptHead> {
    let mut lines: Vec<(u64, String, Value)> = Vec::new();
    let mut files = vec![
        dir.join("ticks.jsonl"),
        dir.join("reviewer.jsonl"),
        dir.join("outbox.jsonl"),
    ];
    if dir.join("agents").is_dir() {
        for entry in fs::read_dir(dir.join("agents"))? {
            files.push(entry?.path());
        }
    }
    for path in files.into_iter().filter(|p| p.is_file()) {
        for line in BufReader::new(File::open(&path)?).lines() {
            let v: Value = serde_json::from_str(&line?).map_err(io::Error::other)?;
            let n = v.get("n").and_then(Value::as_u64).unwrap_or(0);
            let hash = v.get("hash").and_then(Value::as_str).unwrap_or_default().to_string();
            lines.push((n, hash, v.get("record").cloned().unwrap_or(Value::Null)));
        }
    }
    lines.sort_by_key(|l| l.0);
    let mut head = TranscriptHead::default();
    for (n, hash, record) in lines {
        head.digest = chain(&head.digest, &record);
        head.records += 1;
        if n != head.records || hash != head.digest {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("transcript chain broken at record {n}"),
            ));
        }
    }
    Ok(head)
}
