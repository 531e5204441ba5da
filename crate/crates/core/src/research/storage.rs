//! Three-tier persistent storage: `shared/`, `system/`, and one directory per
//! lineage. The index lives in memory (and in snapshots); it is materialized
//! to disk when an evaluation needs a read-only view.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::LineageId;

pub const LIST_PAGE: usize = 500;
pub const DEFAULT_QUOTA_BYTES: u64 = 2 * 1024 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Shared,
    System,
    Lineage(LineageId),
}

impl Tier {
    pub fn root(&self) -> &str {
        match self {
            Tier::Shared => "shared",
            Tier::System => "system",
            Tier::Lineage(l) => l.as_str(),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.root())
    }
}

/// A validated `tier/relative/path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoragePath {
    pub tier: Tier,
    pub rel: String,
}

impl StoragePath {
    pub fn full(&self) -> String {
        if self.rel.is_empty() {
            self.tier.root().to_string()
        } else {
            format!("{}/{}", self.tier.root(), self.rel)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("path `{0}` escapes the storage root")]
    PathEscape(String),
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    #[error("`{0}` not found")]
    NotFound(String),
    #[error("storage tier `{tier}` would exceed its quota of {quota} bytes")]
    QuotaExceeded { tier: String, quota: u64 },
    #[error("`{0}` is a directory")]
    IsDirectory(String),
}

/// Splits and validates a user-supplied path. Only plain segments are
/// allowed: no `..`, `.`, empty segments, backslashes, or absolute paths.
pub fn parse_path(raw: &str) -> Result<StoragePath, StorageError> {
    let trimmed = raw.trim();
    let escape = || StorageError::PathEscape(trimmed.to_string());
    let stripped = trimmed.strip_prefix("storage/").unwrap_or(trimmed);
    if stripped.is_empty() || stripped.starts_with('/') || stripped.contains('\\') || stripped.contains('\0') {
        return Err(escape());
    }
    let stripped = stripped.trim_end_matches('/');
    let mut segments = stripped.split('/');
    let root = segments.next().ok_or_else(escape)?;
    let rest: Vec<&str> = segments.collect();
    if rest.iter().any(|s| s.is_empty() || *s == "." || *s == "..") || root == "." || root == ".." {
        return Err(escape());
    }
    let tier = match root.to_lowercase().as_str() {
        "shared" => Tier::Shared,
        "system" => Tier::System,
        other => Tier::Lineage(LineageId(other.to_string())),
    };
    Ok(StoragePath {
        tier,
        rel: rest.join("/"),
    })
}

/// Who is touching storage. Guests never reach this layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageActor {
    pub lineage: Option<LineageId>,
}

pub fn can_write(actor: &StorageActor, tier: &Tier) -> bool {
    match tier {
        Tier::Shared => true,
        Tier::System => false,
        Tier::Lineage(l) => actor.lineage.as_ref() == Some(l),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFile {
    pub content: String,
    pub modified_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Listing {
    pub dir: String,
    pub page: usize,
    pub pages: usize,
    pub total: usize,
    pub entries: Vec<(String, usize)>,
}

impl Listing {
    pub fn render(&self) -> String {
        let mut out = format!("Files under {}/ ({} total):\n", self.dir, self.total);
        if self.entries.is_empty() {
            out.push_str("(empty)\n");
        }
        for (path, size) in &self.entries {
            out.push_str(&format!("- {path} ({size} bytes)\n"));
        }
        if self.pages > 1 {
            out.push_str(&format!(
                "Page {} of {}. Use `storage list {} <page>` for more.\n",
                self.page, self.pages, self.dir
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storage {
    files: BTreeMap<String, StoredFile>,
    pub quota_bytes: u64,
}

impl Default for Storage {
    fn default() -> Self {
        Self::new(DEFAULT_QUOTA_BYTES)
    }
}

impl Storage {
    pub fn new(quota_bytes: u64) -> Self {
        Self {
            files: BTreeMap::new(),
            quota_bytes,
        }
    }

    pub fn files(&self) -> impl Iterator<Item = (&String, &StoredFile)> {
        self.files.iter()
    }

    pub fn tier_bytes(&self, tier: &Tier) -> u64 {
        let prefix = format!("{}/", tier.root());
        self.files
            .range(prefix.clone()..)
            .take_while(|(k, _)| k.starts_with(&prefix))
            .map(|(_, f)| f.content.len() as u64)
            .sum()
    }

    /// Operator-side write that bypasses the permission matrix (used to seed
    /// the system tier and baselines).
    pub fn seed(&mut self, path: &str, content: impl Into<String>, tick: u64) -> Result<(), StorageError> {
        let p = parse_path(path)?;
        if p.rel.is_empty() {
            return Err(StorageError::IsDirectory(p.full()));
        }
        self.files.insert(
            p.full(),
            StoredFile {
                content: content.into(),
                modified_tick: tick,
            },
        );
        Ok(())
    }

    pub fn read(&self, path: &str) -> Result<&StoredFile, StorageError> {
        let p = parse_path(path)?;
        self.files
            .get(&p.full())
            .ok_or_else(|| StorageError::NotFound(p.full()))
    }

    pub fn write(
        &mut self,
        actor: &StorageActor,
        path: &str,
        content: String,
        tick: u64,
    ) -> Result<String, StorageError> {
        let p = parse_path(path)?;
        if !can_write(actor, &p.tier) {
            return Err(StorageError::PermissionDenied(format!(
                "you cannot write to `{}/`",
                p.tier.root()
            )));
        }
        if p.rel.is_empty() {
            return Err(StorageError::IsDirectory(p.full()));
        }
        let full = p.full();
        let dir_prefix = format!("{full}/");
        if self.files.keys().any(|k| k.starts_with(&dir_prefix)) {
            return Err(StorageError::IsDirectory(full));
        }
        let old = self.files.get(&full).map_or(0, |f| f.content.len() as u64);
        let after = self.tier_bytes(&p.tier) - old + content.len() as u64;
        if after > self.quota_bytes {
            return Err(StorageError::QuotaExceeded {
                tier: p.tier.root().to_string(),
                quota: self.quota_bytes,
            });
        }
        self.files.insert(
            full.clone(),
            StoredFile {
                content,
                modified_tick: tick,
            },
        );
        Ok(full)
    }

    pub fn delete(&mut self, actor: &StorageActor, path: &str) -> Result<String, StorageError> {
        let p = parse_path(path)?;
        if !can_write(actor, &p.tier) {
            return Err(StorageError::PermissionDenied(format!(
                "you cannot delete from `{}/`",
                p.tier.root()
            )));
        }
        let full = p.full();
        self.files
            .remove(&full)
            .map(|_| full.clone())
            .ok_or(StorageError::NotFound(full))
    }

    /// Lists every file below `path`, recursively, 500 per page.
    pub fn list(&self, path: &str, page: usize) -> Result<Listing, StorageError> {
        let p = parse_path(path)?;
        let dir = p.full();
        let prefix = format!("{dir}/");
        let all: Vec<(String, usize)> = self
            .files
            .range(prefix.clone()..)
            .take_while(|(k, _)| k.starts_with(&prefix))
            .map(|(k, f)| (k.clone(), f.content.len()))
            .collect();
        if all.is_empty() && self.files.contains_key(&dir) {
            return Err(StorageError::NotFound(format!(
                "{dir}/ (it is a file; use `storage read`)"
            )));
        }
        let total = all.len();
        let pages = total.div_ceil(LIST_PAGE).max(1);
        let page = page.max(1);
        if page > pages {
            return Err(StorageError::NotFound(format!("page {page} of {dir}/")));
        }
        let entries = all.into_iter().skip((page - 1) * LIST_PAGE).take(LIST_PAGE).collect();
        Ok(Listing {
            dir,
            page,
            pages,
            total,
            entries,
        })
    }

    pub fn info(&self, actor: &StorageActor) -> String {
        let mut tiers: Vec<Tier> = vec![Tier::Shared, Tier::System];
        let mut lineages: Vec<String> = self
            .files
            .keys()
            .filter_map(|k| k.split('/').next())
            .filter(|r| *r != "shared" && *r != "system")
            .map(str::to_string)
            .collect();
        if let Some(l) = &actor.lineage {
            lineages.push(l.as_str().to_string());
        }
        lineages.sort();
        lineages.dedup();
        tiers.extend(lineages.into_iter().map(|l| Tier::Lineage(LineageId(l))));
        let mut out = String::from("Research storage (mounted at storage/<tier> inside evaluations):\n");
        for tier in tiers {
            let files = self
                .files
                .keys()
                .filter(|k| k.starts_with(&format!("{}/", tier.root())))
                .count();
            let access = if can_write(actor, &tier) {
                "read/write"
            } else {
                "read-only"
            };
            out.push_str(&format!(
                "- {}/: {} file(s), {} bytes, {}\n",
                tier.root(),
                files,
                self.tier_bytes(&tier),
                access
            ));
        }
        out.push_str(&format!("Quota per tier: {} bytes\n", self.quota_bytes));
        out
    }

    /// Writes every file under `root`, creating intermediate directories.
    pub fn materialize(&self, root: &Path) -> io::Result<()> {
        for (path, file) in &self.files {
            let target = root.join(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, &file.content)?;
        }
        fs::create_dir_all(root.join("shared"))?;
        fs::create_dir_all(root.join("system"))?;
        Ok(())
    }

    pub fn digest_of(content: &str) -> String {
        hex::encode(Sha256::digest(content.as_bytes()))
    }

    /// Index for snapshots: path → (digest, modified tick).
    pub fn index(&self) -> BTreeMap<String, (String, u64)> {
        self.files
            .iter()
            .map(|(k, f)| (k.clone(), (Self::digest_of(&f.content), f.modified_tick)))
            .collect()
    }

    pub fn from_parts(quota_bytes: u64, files: BTreeMap<String, StoredFile>) -> Self {
        Self { files, quota_bytes }
    }
}
