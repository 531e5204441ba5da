//! Room registry, movement rules, help texts, and per-room observations.

pub mod actions;
mod help;
mod observe;
mod room;

use serde::{Deserialize, Serialize};

pub use actions::{check_entry, enter, execute, verb_rooms, ActionEnv, Effect, RoomError};
pub use help::{fill, HelpTexts, HELP_TEMPLATE_VERSION};
pub use observe::{observe, OBSERVED_CAPSULES};
pub use room::{RoomId, UnknownRoom};

/// What an agent sees of one room it occupied or acted in last tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomObservation {
    pub room: RoomId,
    pub tick: u64,
    pub body: String,
}
