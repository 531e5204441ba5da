//! Per-agent state: identity, lineages, token accounting, stored context,
//! the entry test, and prompt composition.

pub mod context;
mod ids;
mod lineage;
pub mod prompt;
mod record;

pub use context::{AgentContext, ContextEntry, ContextError, ContextUpdate, EntryKind};
pub use entry_test::{EntryTest, TestGrade, TestQuestion};
pub use ids::{roman, AgentId, LineageId};
pub use lineage::{IdentityChoice, IdentityError, LineageRecord, LineageRegistry};
pub use prompt::PromptBundle;
pub use record::{
    estimate_tokens, ActionRecord, AgentRecord, AgentStatus, Identity, MessageKind, SystemMessage, TokenLedger,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    OthersSubmissions,
    ArchiveRoom,
    PublicMemory,
    CommonRoom,
}

/// Immature agents are kept away from other lineages' work and the public
/// rooms. Their own lineage's records are never filtered.
pub fn maturity_allows(age_ticks: u64, maturity_age: u64, _kind: ContentKind) -> bool {
    age_ticks >= maturity_age
}
