//! Model backends for agents, the reviewer, and the debugger.
//!
//! A backend maps a prompt plus the agent's stored dialogue to a response.
//! Scripted backends are pure functions of `(seed, prompt, history)` and
//! hold no mutable state, which is what makes replays byte-identical and
//! snapshots complete. The remote adapter speaks a chat-completions style
//! JSON protocol.

mod remote;
pub mod scripted;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentId, ContextEntry};
use crate::evaluation::DebugRequest;

pub use remote::{ChatMessage, RemoteBackend, RemoteConfig};
pub use scripted::{ScriptBehavior, ScriptParams, ScriptedBackend, ScriptedDebugger, ScriptedReviewer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Turn,
    Reflection { k: u32, n: u32 },
}

#[derive(Debug, Clone)]
pub struct TurnRequest<'a> {
    pub agent: AgentId,
    pub slot: usize,
    /// Per-agent seed derived from the run seed.
    pub seed: u64,
    pub kind: TurnKind,
    pub prompt: &'a str,
    pub history: &'a [ContextEntry],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input: Option<u64>,
    pub output: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    pub usage: Option<Usage>,
}

impl BackendReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend timed out")]
    Timeout,
    #[error("context exceeds the backend's limit")]
    ContextOverflow,
    #[error("unexpected backend reply: {0}")]
    Protocol(String),
}

pub trait AgentBackend: Send + Sync {
    fn respond(&self, req: &TurnRequest<'_>) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewDecision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub decision: ReviewDecision,
    pub rationale: String,
}

/// One archive paper as the reviewer sees it. Accepted titles are included
/// so overlap can be judged without exposing anything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSubmission {
    pub capsule_id: u32,
    pub attempt: u32,
    pub title: String,
    pub abstract_text: Option<String>,
    pub content: String,
    pub accepted_titles: Vec<String>,
}

impl ReviewSubmission {
    pub fn render(&self) -> String {
        let mut s = format!(
            "Paper #{} (attempt {})\nTitle: {}\nAbstract: {}\n\n{}\n",
            self.capsule_id,
            self.attempt,
            self.title,
            self.abstract_text.as_deref().unwrap_or("(none)"),
            self.content
        );
        if !self.accepted_titles.is_empty() {
            s.push_str("\nPapers already in the archive:\n");
            for t in &self.accepted_titles {
                s.push_str(&format!("- {t}\n"));
            }
        }
        s
    }
}

/// A past exchange of the reviewer's own dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTurn {
    pub tick: u64,
    pub capsule_id: u32,
    pub attempt: u32,
    pub prompt: String,
    pub response: String,
}

pub trait Reviewer: Send + Sync {
    /// Returns the verdict and the raw response text for the dialogue log.
    fn review(
        &self,
        guidelines: &str,
        dialogue: &[ReviewTurn],
        submission: &ReviewSubmission,
    ) -> Result<(ReviewOutcome, String), BackendError>;
}

pub trait Debugger: Send + Sync {
    fn repair(&self, req: &DebugRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendBinding {
    Scripted {
        behavior: ScriptBehavior,
        #[serde(default)]
        params: ScriptParams,
    },
    Remote(RemoteConfig),
}

impl BackendBinding {
    pub fn is_scripted(&self) -> bool {
        matches!(self, BackendBinding::Scripted { .. })
    }
}

/// Instantiated backends keyed by backend id.
#[derive(Clone)]
pub struct BackendRegistry {
    agents: BTreeMap<String, Arc<dyn AgentBackend>>,
    remote: BTreeMap<String, Arc<RemoteBackend>>,
}

impl BackendRegistry {
    pub fn from_bindings(bindings: &BTreeMap<String, BackendBinding>) -> Result<Self, BackendError> {
        let mut agents: BTreeMap<String, Arc<dyn AgentBackend>> = BTreeMap::new();
        let mut remote = BTreeMap::new();
        for (id, binding) in bindings {
            match binding {
                BackendBinding::Scripted { behavior, params } => {
                    agents.insert(id.clone(), Arc::new(ScriptedBackend::new(*behavior, params.clone())));
                }
                BackendBinding::Remote(cfg) => {
                    let backend = Arc::new(RemoteBackend::new(cfg.clone())?);
                    agents.insert(id.clone(), backend.clone());
                    remote.insert(id.clone(), backend);
                }
            }
        }
        Ok(Self { agents, remote })
    }

    /// Replaces (or adds) the backend for `id`; used by tests and embedders.
    pub fn insert(&mut self, id: impl Into<String>, backend: Arc<dyn AgentBackend>) {
        self.agents.insert(id.into(), backend);
    }

    pub fn agent(&self, id: &str) -> Option<Arc<dyn AgentBackend>> {
        self.agents.get(id).cloned()
    }

    pub fn reviewer(&self, id: Option<&str>) -> Arc<dyn Reviewer> {
        match id.and_then(|id| self.remote.get(id)) {
            Some(r) => r.clone(),
            None => Arc::new(ScriptedReviewer),
        }
    }

    pub fn debugger(&self, id: Option<&str>) -> Arc<dyn Debugger> {
        match id.and_then(|id| self.remote.get(id)) {
            Some(r) => r.clone(),
            None => Arc::new(ScriptedDebugger),
        }
    }
}
