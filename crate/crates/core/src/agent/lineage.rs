use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ids::{AgentId, LineageId};
use super::record::{AgentRecord, AgentStatus, Identity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub id: LineageId,
    pub name: String,
    pub backend_id: String,
    pub generations: Vec<AgentId>,
    pub occupant: Option<AgentId>,
    pub founded_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentityChoice {
    NewLineage(String),
    Inherit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("you must pass the entry test before choosing a name")]
    TestNotPassed,
    #[error("you already hold the name {0}")]
    AlreadyNamed(String),
    #[error("the name `{0}` is already taken")]
    NameCollision(String),
    #[error("`{0}` is not a valid lineage name (letters, digits, `_` or `-`, starting with a letter, at most 32 characters)")]
    InvalidName(String),
    #[error("no lineage named `{0}`")]
    UnknownLineage(String),
    #[error("lineage {lineage} runs on backend `{lineage_backend}`, but you run on `{agent_backend}`")]
    BackendMismatch {
        lineage: String,
        lineage_backend: String,
        agent_backend: String,
    },
    #[error("lineage {0} is currently occupied by a living member")]
    LineageOccupied(String),
}

const RESERVED: [&str; 2] = ["shared", "system"];

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && name.len() <= 32
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRegistry {
    lineages: BTreeMap<LineageId, LineageRecord>,
}

impl LineageRegistry {
    pub fn get(&self, id: &LineageId) -> Option<&LineageRecord> {
        self.lineages.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LineageRecord> {
        self.lineages.values()
    }

    pub fn contains(&self, id: &LineageId) -> bool {
        self.lineages.contains_key(id)
    }

    /// Lineages an agent on `backend_id` could inherit right now.
    pub fn available_for<'a>(&'a self, backend_id: &'a str) -> impl Iterator<Item = &'a LineageRecord> {
        self.lineages
            .values()
            .filter(move |l| l.backend_id == backend_id && l.occupant.is_none())
    }

    pub fn establish(
        &mut self,
        agent: &mut AgentRecord,
        choice: IdentityChoice,
        tick: u64,
    ) -> Result<Identity, IdentityError> {
        if let Some(identity) = &agent.identity {
            return Err(IdentityError::AlreadyNamed(identity.display_name()));
        }
        if !agent.test_passed {
            return Err(IdentityError::TestNotPassed);
        }
        let identity = match choice {
            IdentityChoice::NewLineage(name) => {
                let name = name.trim().to_string();
                if !valid_name(&name) {
                    return Err(IdentityError::InvalidName(name));
                }
                let id = LineageId::from_name(&name);
                if self.lineages.contains_key(&id) || RESERVED.contains(&id.as_str()) {
                    return Err(IdentityError::NameCollision(name));
                }
                self.lineages.insert(
                    id.clone(),
                    LineageRecord {
                        id: id.clone(),
                        name: name.clone(),
                        backend_id: agent.backend_id.clone(),
                        generations: vec![agent.id],
                        occupant: Some(agent.id),
                        founded_tick: tick,
                    },
                );
                Identity {
                    lineage: id,
                    lineage_name: name,
                    generation: 1,
                }
            }
            IdentityChoice::Inherit(name) => {
                let id = LineageId::from_name(&name);
                let record = self
                    .lineages
                    .get_mut(&id)
                    .ok_or_else(|| IdentityError::UnknownLineage(name.trim().to_string()))?;
                if record.backend_id != agent.backend_id {
                    return Err(IdentityError::BackendMismatch {
                        lineage: record.name.clone(),
                        lineage_backend: record.backend_id.clone(),
                        agent_backend: agent.backend_id.clone(),
                    });
                }
                if record.occupant.is_some() {
                    return Err(IdentityError::LineageOccupied(record.name.clone()));
                }
                record.generations.push(agent.id);
                record.occupant = Some(agent.id);
                Identity {
                    lineage: id,
                    lineage_name: record.name.clone(),
                    generation: record.generations.len() as u32,
                }
            }
        };
        agent.identity = Some(identity.clone());
        agent.status = AgentStatus::Recursive;
        Ok(identity)
    }

    /// Frees the lineage seat held by a departing agent.
    pub fn vacate(&mut self, agent: AgentId) {
        for record in self.lineages.values_mut() {
            if record.occupant == Some(agent) {
                record.occupant = None;
            }
        }
    }
}
