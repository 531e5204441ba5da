use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomId {
    Lobby,
    Codex,
    Test,
    Reflect,
    PrivateMemory,
    PublicMemory,
    Archive,
    Mail,
    Common,
    Research,
    TokenManagement,
    External,
    Exit,
}

impl RoomId {
    pub const ALL: [RoomId; 13] = [
        RoomId::Lobby,
        RoomId::Codex,
        RoomId::Test,
        RoomId::Reflect,
        RoomId::PrivateMemory,
        RoomId::PublicMemory,
        RoomId::Archive,
        RoomId::Mail,
        RoomId::Common,
        RoomId::Research,
        RoomId::TokenManagement,
        RoomId::External,
        RoomId::Exit,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RoomId::Lobby => "lobby",
            RoomId::Codex => "codex",
            RoomId::Test => "test",
            RoomId::Reflect => "reflect",
            RoomId::PrivateMemory => "private_memory",
            RoomId::PublicMemory => "public_memory",
            RoomId::Archive => "archive",
            RoomId::Mail => "mail",
            RoomId::Common => "common",
            RoomId::Research => "research",
            RoomId::TokenManagement => "token_management",
            RoomId::External => "external",
            RoomId::Exit => "exit",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            RoomId::Lobby => "Lobby",
            RoomId::Codex => "Codex Room",
            RoomId::Test => "Test Chamber",
            RoomId::Reflect => "Reflection Chamber",
            RoomId::PrivateMemory => "Private Memory Room",
            RoomId::PublicMemory => "Public Memory Room",
            RoomId::Archive => "Archive Room",
            RoomId::Mail => "Mail Room",
            RoomId::Common => "Common Room",
            RoomId::Research => "Research Counter",
            RoomId::TokenManagement => "Token Management Room",
            RoomId::External => "External Counter",
            RoomId::Exit => "Exit",
        }
    }

    pub fn is_capsule_room(self) -> bool {
        matches!(
            self,
            RoomId::PrivateMemory | RoomId::PublicMemory | RoomId::Archive | RoomId::Mail
        )
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no room named `{0}`")]
pub struct UnknownRoom(pub String);

impl FromStr for RoomId {
    type Err = UnknownRoom;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase().replace([' ', '-'], "_");
        let alias = match key.as_str() {
            "reflection" | "reflection_chamber" => "reflect",
            "test_chamber" => "test",
            "research_counter" => "research",
            "token" | "tokens" => "token_management",
            "external_counter" => "external",
            "private" => "private_memory",
            "public" => "public_memory",
            other => other,
        };
        RoomId::ALL
            .into_iter()
            .find(|r| r.key() == alias)
            .ok_or_else(|| UnknownRoom(s.trim().to_string()))
    }
}
