use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentRecord, LineageRegistry, MessageKind};
use crate::capsules::{CapsuleStore, Viewer};
use crate::evaluation::EvaluationJob;
use crate::governance::GovernanceState;
use crate::research::{BoardViewer, ResearchBoard, Storage, StorageActor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Running,
    PausedOnEvaluation,
    Halted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleKind {
    Spawned,
    DepartedVoluntarily,
    LifeLimitReached,
    TokenBudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub agent: AgentId,
    pub slot: usize,
    pub kind: LifecycleKind,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonMessage {
    pub tick: u64,
    pub agent: AgentId,
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxRecord {
    pub seq: u32,
    pub tick: u64,
    pub agent: AgentId,
    pub name: String,
    pub content: String,
}

/// A system message whose recipient had already departed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Undelivered {
    pub tick: u64,
    pub agent: AgentId,
    pub kind: MessageKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartedAgent {
    pub record: AgentRecord,
    pub reason: LifecycleKind,
    pub tick: u64,
}

/// Running hash over every transcript record emitted so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptHead {
    pub digest: String,
    pub records: u64,
}

/// The complete mutable state of a Station run. Everything the tick loop
/// reads lives here, so serializing it (plus storage) is a full snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    /// Number of completed ticks; the next tick to run is `tick + 1`.
    pub tick: u64,
    /// Logical clock: one step per completed tick and per pause step.
    pub wall: u64,
    pub phase: Phase,
    pub next_agent_id: u64,
    /// Agent occupying each turn-order slot.
    pub slots: Vec<AgentId>,
    pub agents: BTreeMap<AgentId, AgentRecord>,
    pub departed: Vec<DepartedAgent>,
    pub lineages: LineageRegistry,
    pub capsules: CapsuleStore,
    pub board: ResearchBoard,
    pub jobs: BTreeMap<u32, EvaluationJob>,
    /// Persisted separately as a directory tree in snapshots.
    #[serde(skip)]
    pub storage: Storage,
    pub common: Vec<CommonMessage>,
    pub governance: GovernanceState,
    pub outbox: Vec<OutboxRecord>,
    pub undelivered: Vec<Undelivered>,
    pub transcript: TranscriptHead,
}

impl World {
    pub fn new(board: ResearchBoard, storage: Storage) -> Self {
        Self {
            tick: 0,
            wall: 0,
            phase: Phase::Running,
            next_agent_id: 1,
            slots: Vec::new(),
            agents: BTreeMap::new(),
            departed: Vec::new(),
            lineages: LineageRegistry::default(),
            capsules: CapsuleStore::default(),
            board,
            jobs: BTreeMap::new(),
            storage,
            common: Vec::new(),
            governance: GovernanceState::default(),
            outbox: Vec::new(),
            undelivered: Vec::new(),
            transcript: TranscriptHead::default(),
        }
    }

    /// Queues a system message, or logs it as undeliverable when the agent
    /// is gone (including an agent mid-turn, which is handled by the caller).
    pub fn notify(&mut self, agent: AgentId, tick: u64, kind: MessageKind, text: impl Into<String>) {
        let text = text.into();
        match self.agents.get_mut(&agent) {
            Some(a) => a.push_message(tick, kind, text),
            None => self.undelivered.push(Undelivered {
                tick,
                agent,
                kind,
                text,
            }),
        }
    }

    pub fn broadcast(&mut self, tick: u64, kind: MessageKind, text: &str, except: Option<AgentId>) {
        for (id, a) in self.agents.iter_mut() {
            if Some(*id) != except {
                a.push_message(tick, kind, text.to_string());
            }
        }
    }

    /// Looks up a live agent by display name (`Aion I`), lineage name (the
    /// current member), or guest label (`Guest 3`), case-insensitively.
    pub fn find_agent(&self, name: &str, extra: Option<&AgentRecord>) -> Option<(AgentId, String)> {
        let wanted = name.trim().to_lowercase();
        let candidates = self.agents.values().chain(extra);
        let mut by_lineage = None;
        for a in candidates {
            let display = a.display_name();
            if display.to_lowercase() == wanted {
                return Some((a.id, display));
            }
            if let Some(i) = &a.identity {
                if i.lineage_name.to_lowercase() == wanted {
                    by_lineage = Some((a.id, display));
                }
            }
        }
        by_lineage
    }

    pub fn live_count(&self) -> usize {
        self.agents.len()
    }

    /// Whether any active job would be older than `gate` at the boundary
    /// before the next tick.
    pub fn gate_pending(&self, gate: u64) -> bool {
        let next = self.tick + 1;
        self.jobs.values().any(|j| j.is_active() && j.age_at(next) > gate)
    }
}

pub fn viewer_of(agent: &AgentRecord, maturity_age: u64) -> Viewer {
    Viewer {
        agent: agent.id,
        name: agent.display_name(),
        lineage: agent.lineage().cloned(),
        guest: agent.is_guest(),
        mature: agent.is_mature(maturity_age),
    }
}

pub fn board_viewer_of(agent: &AgentRecord, maturity_age: u64) -> BoardViewer {
    BoardViewer {
        agent: agent.id,
        lineage: agent.lineage().cloned(),
        mature: agent.is_mature(maturity_age),
    }
}

pub fn storage_actor_of(agent: &AgentRecord) -> StorageActor {
    StorageActor {
        lineage: agent.lineage().cloned(),
    }
}
