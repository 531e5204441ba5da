use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::context::AgentContext;
use super::ids::{roman, AgentId, LineageId};
use crate::research::LeaderboardPrefs;
use crate::rooms::RoomId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Guest,
    Recursive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub lineage: LineageId,
    pub lineage_name: String,
    pub generation: u32,
}

impl Identity {
    pub fn display_name(&self) -> String {
        format!("{} {}", self.lineage_name, roman(self.generation))
    }
}

/// Cumulative token usage against a fixed budget. Counters never decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub budget: u64,
    pub cumulative_in: u64,
    pub cumulative_out: u64,
}

impl TokenLedger {
    pub fn new(budget: u64) -> Self {
        Self {
            budget,
            cumulative_in: 0,
            cumulative_out: 0,
        }
    }

    pub fn used(&self) -> u64 {
        self.cumulative_in + self.cumulative_out
    }

    pub fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.used())
    }

    /// Termination is due only once usage strictly exceeds the budget.
    pub fn exceeded(&self) -> bool {
        self.used() > self.budget
    }

    pub fn charge(&mut self, input: u64, output: u64) -> bool {
        self.cumulative_in += input;
        self.cumulative_out += output;
        self.exceeded()
    }
}

/// Deterministic token estimate used when a backend reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Welcome,
    Mail,
    Announcement,
    EvaluationResult,
    ReviewVerdict,
    Maturity,
    Stagnation,
    Notice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemMessage {
    pub tick: u64,
    pub kind: MessageKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub verb: String,
    pub argument: Option<String>,
    pub ok: bool,
    pub message: String,
}

impl ActionRecord {
    pub fn command(&self) -> String {
        match &self.argument {
            Some(a) => format!("{} {}", self.verb, a),
            None => self.verb.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: AgentId,
    pub slot: usize,
    pub backend_id: String,
    pub status: AgentStatus,
    pub identity: Option<Identity>,
    pub test_passed: bool,
    pub spawned_tick: u64,
    pub age_ticks: u64,
    pub location: RoomId,
    pub meta_prompt: Option<String>,
    pub description: String,
    pub ledger: TokenLedger,
    pub help_seen: BTreeSet<RoomId>,
    /// Rooms whose first-visit help is shown with the next observations.
    pub pending_help: Vec<RoomId>,
    pub read_tasks: BTreeSet<u32>,
    pub inbox: Vec<SystemMessage>,
    /// Rooms occupied or acted in during the agent's last turn, in order.
    pub visited: Vec<RoomId>,
    pub last_actions: Vec<ActionRecord>,
    pub leaderboard: LeaderboardPrefs,
    pub pending_exit: Option<u64>,
    pub context: AgentContext,
}

impl AgentRecord {
    pub fn new(id: AgentId, slot: usize, backend_id: String, budget: u64, tick: u64) -> Self {
        Self {
            id,
            slot,
            backend_id,
            status: AgentStatus::Guest,
            identity: None,
            test_passed: false,
            spawned_tick: tick,
            age_ticks: 0,
            location: RoomId::Lobby,
            meta_prompt: None,
            description: String::new(),
            ledger: TokenLedger::new(budget),
            help_seen: BTreeSet::from([RoomId::Lobby]),
            pending_help: Vec::new(),
            read_tasks: BTreeSet::new(),
            inbox: Vec::new(),
            visited: Vec::new(),
            last_actions: Vec::new(),
            leaderboard: LeaderboardPrefs::default(),
            pending_exit: None,
            context: AgentContext::default(),
        }
    }

    pub fn display_name(&self) -> String {
        match &self.identity {
            Some(identity) => identity.display_name(),
            None => format!("Guest {}", self.id.0),
        }
    }

    pub fn lineage(&self) -> Option<&LineageId> {
        self.identity.as_ref().map(|i| &i.lineage)
    }

    pub fn is_guest(&self) -> bool {
        self.status == AgentStatus::Guest
    }

    pub fn is_mature(&self, maturity_age: u64) -> bool {
        self.age_ticks >= maturity_age
    }

    pub fn push_message(&mut self, tick: u64, kind: MessageKind, text: impl Into<String>) {
        self.inbox.push(SystemMessage {
            tick,
            kind,
            text: text.into(),
        });
    }

    pub fn note_visit(&mut self, room: RoomId) {
        if self.visited.last() != Some(&room) {
            self.visited.push(room);
        }
    }
}
