//! Run manifest: every tunable of a Station run, loadable from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::EntryTest;
use crate::backends::BackendBinding;
use crate::research::storage::DEFAULT_QUOTA_BYTES;
use crate::research::TaskSpec;

pub const DEFAULT_CODEX: &str = include_str!("../templates/codex.md");
pub const DEFAULT_REVIEW_GUIDELINES: &str = include_str!("../templates/review_guidelines.md");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("could not parse manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("could not read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReviewerConfig {
    pub enabled: bool,
    /// Backend used for reviews; `None` selects the built-in rule-based reviewer.
    pub backend: Option<String>,
    pub guidelines: String,
}

impl Default for ReviewerConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            backend: None,
            guidelines: DEFAULT_REVIEW_GUIDELINES.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebuggerConfig {
    pub enabled: bool,
    /// Backend used for repairs; `None` selects the built-in token stripper.
    pub backend: Option<String>,
}

impl Default for DebuggerConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            backend: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationConfig {
    pub agent_count: usize,
    pub life_limit_ticks: u64,
    pub maturity_age_ticks: u64,
    pub eval_gate_ticks: u64,
    pub eval_concurrency_per_agent: usize,
    pub stagnation_threshold_ticks: u64,
    /// Budget per backend id; backends not listed use `default_token_budget`.
    pub token_budgets: BTreeMap<String, u64>,
    pub default_token_budget: u64,
    pub codex_text: String,
    pub task_specs: Vec<TaskSpec>,
    pub rng_seed: u64,
    /// Halt after this many completed ticks (`None`: run until stopped).
    pub max_ticks: Option<u64>,
    /// Backend id for each turn-order slot; its length must equal `agent_count`.
    pub slots: Vec<String>,
    pub backends: BTreeMap<String, BackendBinding>,
    pub reviewer: ReviewerConfig,
    pub debugger: DebuggerConfig,
    pub common_ttl_ticks: u64,
    pub reflection_default_ticks: u32,
    pub reflection_max_ticks: u32,
    /// Lineage whose current member guests may mail. `None`: guests cannot send mail.
    pub guest_mail_contact: Option<String>,
    pub entry_test: EntryTest,
    pub eval_workers: usize,
    pub storage_quota_bytes: u64,
    pub snapshot_every_ticks: u64,
    /// Directory of help-text overrides (`<room>.md`).
    pub help_dir: Option<PathBuf>,
    /// Files seeded into storage at start, keyed by storage path.
    pub seed_storage: BTreeMap<String, String>,
    pub max_response_bytes: usize,
    /// Real-time wait per pause step for wall-clock jobs, in milliseconds.
    pub pause_poll_millis: u64,
}

impl Default for StationConfig {
    fn default() -> Self {
        Self {
            agent_count: 5,
            life_limit_ticks: 300,
            maturity_age_ticks: 50,
            eval_gate_ticks: 2,
            eval_concurrency_per_agent: 2,
            stagnation_threshold_ticks: 100,
            token_budgets: BTreeMap::new(),
            default_token_budget: 1_000_000,
            codex_text: DEFAULT_CODEX.to_string(),
            task_specs: Vec::new(),
            rng_seed: 0,
            max_ticks: None,
            slots: Vec::new(),
            backends: BTreeMap::new(),
            reviewer: ReviewerConfig::default(),
            debugger: DebuggerConfig::default(),
            common_ttl_ticks: 5,
            reflection_default_ticks: 5,
            reflection_max_ticks: 10,
            guest_mail_contact: None,
            entry_test: EntryTest::default(),
            eval_workers: 4,
            storage_quota_bytes: DEFAULT_QUOTA_BYTES,
            snapshot_every_ticks: 50,
            help_dir: None,
            seed_storage: BTreeMap::new(),
            max_response_bytes: 1 << 20,
            pause_poll_millis: 50,
        }
    }
}

impl StationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: StationConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: StationConfig = toml::from_str(&text)?;
        if let (Some(dir), Some(parent)) = (&config.help_dir, path.parent()) {
            if dir.is_relative() {
                config.help_dir = Some(parent.join(dir));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn token_budget(&self, backend_id: &str) -> u64 {
        self.token_budgets
            .get(backend_id)
            .copied()
            .unwrap_or(self.default_token_budget)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.agent_count == 0 {
            return bad("agent_count must be at least 1".into());
        }
        for (name, v) in [
            ("life_limit_ticks", self.life_limit_ticks),
            ("eval_gate_ticks", self.eval_gate_ticks),
            ("stagnation_threshold_ticks", self.stagnation_threshold_ticks),
            ("common_ttl_ticks", self.common_ttl_ticks),
            ("snapshot_every_ticks", self.snapshot_every_ticks),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.eval_concurrency_per_agent == 0 {
            return bad("eval_concurrency_per_agent must be at least 1".into());
        }
        if self.maturity_age_ticks > self.life_limit_ticks {
            return bad("maturity_age_ticks cannot exceed life_limit_ticks".into());
        }
        if self.slots.len() != self.agent_count {
            return bad(format!(
                "slots lists {} backends but agent_count is {}",
                self.slots.len(),
                self.agent_count
            ));
        }
        for id in self
            .slots
            .iter()
            .chain(self.reviewer.backend.iter())
            .chain(self.debugger.backend.iter())
        {
            if !self.backends.contains_key(id) {
                return bad(format!("backend `{id}` is not defined under [backends]"));
            }
        }
        for (id, budget) in &self.token_budgets {
            if *budget == 0 {
                return bad(format!("token budget for `{id}` must be positive"));
            }
        }
        if self.default_token_budget == 0 {
            return bad("default_token_budget must be positive".into());
        }
        if self.reflection_default_ticks == 0
            || self.reflection_max_ticks == 0
            || self.reflection_default_ticks > self.reflection_max_ticks
        {
            return bad("reflection ticks must satisfy 1 <= default <= max".into());
        }
        let mut ids: Vec<u32> = self.task_specs.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.contains(&0) || ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("task ids must be positive and unique".into());
        }
        for t in &self.task_specs {
            if t.logical_duration_ticks == 0 {
                return bad(format!("task {}: logical_duration_ticks must be at least 1", t.id));
            }
        }
        if self.entry_test.questions.is_empty() {
            return bad("entry_test needs at least one question".into());
        }
        Ok(())
    }
}
