use serde::{Deserialize, Serialize};

use super::record::SystemMessage;
use crate::rooms::RoomObservation;

pub const SECTION_TITLES: [&str; 5] = [
    "System Information",
    "System Messages",
    "Actions Executed",
    "Room Observations",
    "Current Status",
];

/// The five-part prompt an agent receives each turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_information: String,
    pub system_messages: Vec<SystemMessage>,
    pub actions_executed: Vec<String>,
    pub room_observations: Vec<RoomObservation>,
    pub current_status: String,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut section = |title: &str, body: String| {
            out.push_str("## ");
            out.push_str(title);
            out.push_str("\n\n");
            if body.trim().is_empty() {
                out.push_str("(none)\n");
            } else {
                out.push_str(body.trim_end());
                out.push('\n');
            }
            out.push('\n');
        };
        section(SECTION_TITLES[0], self.system_information.clone());
        section(
            SECTION_TITLES[1],
            self.system_messages
                .iter()
                .map(|m| format!("[tick {}] {}", m.tick, m.text.trim_end()))
                .collect::<Vec<_>>()
                .join("\n\n---\n\n"),
        );
        section(
            SECTION_TITLES[2],
            self.actions_executed
                .iter()
                .map(|a| format!("- {a}"))
                .collect::<Vec<_>>()
                .join("\n"),
        );
        section(
            SECTION_TITLES[3],
            self.room_observations
                .iter()
                .map(|o| format!("### {} (tick {})\n\n{}", o.room.title(), o.tick, o.body.trim_end()))
                .collect::<Vec<_>>()
                .join("\n\n"),
        );
        section(SECTION_TITLES[4], self.current_status.clone());
        out
    }
}

/// Splits a rendered prompt into `(title, body)` sections, in order.
pub fn split_sections(rendered: &str) -> Vec<(String, String)> {
    let mut sections: Vec<(String, String)> = Vec::new();
    for line in rendered.lines() {
        if let Some(title) = line.strip_prefix("## ") {
            if SECTION_TITLES.contains(&title) {
                sections.push((title.to_string(), String::new()));
                continue;
            }
        }
        if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    sections
}

pub fn reflection_prompt(k: u32, n: u32, seed_prompt: &str) -> String {
    if k == 1 {
        format!("Reflection Tick {k} / {n}\n\n{seed_prompt}")
    } else {
        format!("Reflection Tick {k} / {n}\n\nContinue your reflection.")
    }
}
