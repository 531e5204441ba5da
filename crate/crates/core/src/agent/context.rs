//! The stored dialogue an agent's backend sees, and its compaction.
//!
//! Entries carry stable sequence numbers so compaction ranges stay
//! meaningful after earlier compactions. The append-only transcript is kept
//! elsewhere and is never touched by these operations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EntryKind {
    Turn,
    Reflection,
    Summary { first: u64, last: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub seq: u64,
    pub tick: u64,
    pub kind: EntryKind,
    pub prompt: String,
    pub response: String,
}

impl ContextEntry {
    pub fn len(&self) -> usize {
        self.prompt.len() + self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("malformed turn range `{0}` (use a:b, e.g. 1:40)")]
    MalformedRange(String),
    #[error("range {0}:{1} reaches the current turn ({2}); only past turns can be compacted")]
    IncludesCurrentTurn(u64, u64, u64),
    #[error("summary ({summary} bytes) must be shorter than the turns it replaces ({original} bytes)")]
    SummaryNotShorter { summary: usize, original: usize },
    #[error("summary text is empty")]
    EmptySummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextUpdate {
    pub removed_entries: usize,
    pub bytes_before: usize,
    pub bytes_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentContext {
    entries: Vec<ContextEntry>,
    next_seq: u64,
}

pub fn parse_turn_range(s: &str) -> Result<(u64, u64), ContextError> {
    let bad = || ContextError::MalformedRange(s.to_string());
    let s = s.trim();
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, s),
    };
    let a: u64 = a.parse().map_err(|_| bad())?;
    let b: u64 = b.parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

impl AgentContext {
    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    /// Sequence number the next pushed entry will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq.max(1)
    }

    pub fn stored_bytes(&self) -> usize {
        self.entries.iter().map(ContextEntry::len).sum()
    }

    pub fn push(&mut self, tick: u64, kind: EntryKind, prompt: String, response: String) -> u64 {
        let seq = self.next_seq();
        self.next_seq = seq + 1;
        self.entries.push(ContextEntry {
            seq,
            tick,
            kind,
            prompt,
            response,
        });
        seq
    }

    fn check_range(first: u64, last: u64, current: u64) -> Result<(), ContextError> {
        if last >= current {
            return Err(ContextError::IncludesCurrentTurn(first, last, current));
        }
        Ok(())
    }

    fn span(&self, first: u64, last: u64) -> (usize, usize) {
        let start = self.entries.partition_point(|e| e.seq < first);
        let end = self.entries.partition_point(|e| e.seq <= last);
        (start, end)
    }

    /// Replaces past entries in `first..=last` with one summary entry.
    /// `current` is the sequence number of the turn in progress.
    pub fn summarize(
        &mut self,
        first: u64,
        last: u64,
        summary: &str,
        current: u64,
    ) -> Result<ContextUpdate, ContextError> {
        Self::check_range(first, last, current)?;
        if summary.trim().is_empty() {
            return Err(ContextError::EmptySummary);
        }
        let before = self.stored_bytes();
        let (start, end) = self.span(first, last);
        if start == end {
            return Ok(ContextUpdate {
                removed_entries: 0,
                bytes_before: before,
                bytes_after: before,
            });
        }
        let original: usize = self.entries[start..end].iter().map(ContextEntry::len).sum();
        if summary.len() >= original {
            return Err(ContextError::SummaryNotShorter {
                summary: summary.len(),
                original,
            });
        }
        let seq = self.entries[start].seq;
        let tick = self.entries[end - 1].tick;
        let removed = end - start;
        self.entries.splice(
            start..end,
            [ContextEntry {
                seq,
                tick,
                kind: EntryKind::Summary { first, last },
                prompt: String::new(),
                response: summary.to_string(),
            }],
        );
        Ok(ContextUpdate {
            removed_entries: removed,
            bytes_before: before,
            bytes_after: self.stored_bytes(),
        })
    }

    pub fn prune(&mut self, first: u64, last: u64, current: u64) -> Result<ContextUpdate, ContextError> {
        Self::check_range(first, last, current)?;
        let before = self.stored_bytes();
        let (start, end) = self.span(first, last);
        self.entries.drain(start..end);
        Ok(ContextUpdate {
            removed_entries: end - start,
            bytes_before: before,
            bytes_after: self.stored_bytes(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(n: u64) -> AgentContext {
        let mut ctx = AgentContext::default();
        for t in 1..=n {
            ctx.push(
                t,
                EntryKind::Turn,
                format!("prompt {t} ").repeat(10),
                "response".repeat(5),
            );
        }
        ctx
    }

    #[test]
    fn summarize_shrinks_stored_context() {
        let mut ctx = filled(50);
        let before = ctx.stored_bytes();
        let upd = ctx.summarize(1, 40, "forty turns of packing experiments", 51).unwrap();
        assert_eq!(upd.removed_entries, 40);
        assert!(ctx.stored_bytes() < before);
        assert_eq!(ctx.entries().len(), 11);
        assert_eq!(ctx.entries()[0].kind, EntryKind::Summary { first: 1, last: 40 });
    }

    #[test]
    fn prune_twice_is_noop_ack() {
        let mut ctx = filled(10);
        assert_eq!(ctx.prune(2, 4, 11).unwrap().removed_entries, 3);
        let again = ctx.prune(2, 4, 11).unwrap();
        assert_eq!(again.removed_entries, 0);
        assert_eq!(again.bytes_before, again.bytes_after);
    }

    #[test]
    fn current_turn_is_protected() {
        let mut ctx = filled(10);
        assert!(matches!(
            ctx.prune(5, 11, 11),
            Err(ContextError::IncludesCurrentTurn(..))
        ));
    }

    #[test]
    fn summary_must_be_shorter() {
        let mut ctx = filled(2);
        let long = "x".repeat(10_000);
        assert!(matches!(
            ctx.summarize(1, 2, &long, 3),
            Err(ContextError::SummaryNotShorter { .. })
        ));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_turn_range("1:40").unwrap(), (1, 40));
        assert_eq!(parse_turn_range("7").unwrap(), (7, 7));
        assert!(parse_turn_range("5:2").is_err());
        assert!(parse_turn_range("0:2").is_err());
        assert!(parse_turn_range("a:b").is_err());
    }
}
