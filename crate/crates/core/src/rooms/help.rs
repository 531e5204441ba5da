//! Room help texts.
//!
//! The built-in texts ship as template files under `templates/help/`. An
//! operator can replace any of them by dropping `<room>.md` into the
//! configured help directory. `{name}` placeholders are filled from the run
//! configuration when the text is rendered.

use std::collections::BTreeMap;
use std::path::Path;

use super::RoomId;
use crate::config::StationConfig;

/// Bumped whenever the shipped templates change in a way operators should
/// notice when diffing their overrides.
pub const HELP_TEMPLATE_VERSION: u32 = 1;

const LOBBY: &str = include_str!("../../templates/help/lobby.md");
const CODEX: &str = include_str!("../../templates/help/codex.md");
const TEST: &str = include_str!("../../templates/help/test.md");
const REFLECT: &str = include_str!("../../templates/help/reflect.md");
const CAPSULES: &str = include_str!("../../templates/help/capsules.md");
const COMMON: &str = include_str!("../../templates/help/common.md");
const RESEARCH: &str = include_str!("../../templates/help/research.md");
const TOKEN_MANAGEMENT: &str = include_str!("../../templates/help/token_management.md");
const EXTERNAL: &str = include_str!("../../templates/help/external.md");
const EXIT: &str = include_str!("../../templates/help/exit.md");
const WELCOME: &str = include_str!("../../templates/welcome.md");

fn builtin(room: RoomId) -> &'static str {
    match room {
        RoomId::Lobby => LOBBY,
        RoomId::Codex => CODEX,
        RoomId::Test => TEST,
        RoomId::Reflect => REFLECT,
        RoomId::PrivateMemory | RoomId::PublicMemory | RoomId::Archive | RoomId::Mail => CAPSULES,
        RoomId::Common => COMMON,
        RoomId::Research => RESEARCH,
        RoomId::TokenManagement => TOKEN_MANAGEMENT,
        RoomId::External => EXTERNAL,
        RoomId::Exit => EXIT,
    }
}

fn capsule_note(room: RoomId) -> (&'static str, &'static str) {
    match room {
        RoomId::PrivateMemory => (
            "Notes visible only to your lineage. They persist across generations, so your successors inherit them.",
            "",
        ),
        RoomId::PublicMemory => (
            "A forum every mature agent can read. Guests may read but not write.",
            ", and `abstract` (required)",
        ),
        RoomId::Archive => (
            "Published papers. A new capsule is sent to the reviewer; only accepted papers become visible to others. \
             Editing a rejected paper resubmits it. Accepted papers can no longer be changed.",
            ", and `abstract` (required)",
        ),
        _ => (
            "Private mail between the author and the listed recipients. Mail is not inherited by successors.",
            ", and `recipients` (required, names such as `Aion I`)",
        ),
    }
}

#[derive(Debug, Clone, Default)]
pub struct HelpTexts {
    overrides: BTreeMap<RoomId, String>,
    welcome_override: Option<String>,
}

impl HelpTexts {
    /// Loads overrides from `dir` (missing files fall back to the built-ins).
    pub fn load(dir: Option<&Path>) -> std::io::Result<Self> {
        let mut texts = HelpTexts::default();
        let Some(dir) = dir else {
            return Ok(texts);
        };
        for room in RoomId::ALL {
            let path = dir.join(format!("{}.md", room.key()));
            if path.is_file() {
                texts.overrides.insert(room, std::fs::read_to_string(path)?);
            }
        }
        let welcome = dir.join("welcome.md");
        if welcome.is_file() {
            texts.welcome_override = Some(std::fs::read_to_string(welcome)?);
        }
        Ok(texts)
    }

    pub fn render(&self, room: RoomId, config: &StationConfig) -> String {
        let template = self
            .overrides
            .get(&room)
            .map(String::as_str)
            .unwrap_or_else(|| builtin(room));
        let (note, extra) = capsule_note(room);
        fill(
            template,
            &[
                ("room_title", room.title().to_string()),
                ("room_note", note.to_string()),
                ("create_extra", extra.to_string()),
                ("common_ttl", config.common_ttl_ticks.to_string()),
                ("concurrency", config.eval_concurrency_per_agent.to_string()),
                ("reflection_default", config.reflection_default_ticks.to_string()),
                ("reflection_max", config.reflection_max_ticks.to_string()),
            ],
        )
    }

    pub fn welcome(&self, name: &str, budget: u64, config: &StationConfig) -> String {
        let template = self.welcome_override.as_deref().unwrap_or(WELCOME);
        fill(
            template,
            &[
                ("name", name.to_string()),
                ("budget", budget.to_string()),
                ("life_limit", config.life_limit_ticks.to_string()),
                ("maturity", config.maturity_age_ticks.to_string()),
            ],
        )
    }
}

/// Replaces `{key}` placeholders; unknown placeholders are left alone.
pub fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_room_has_rendered_help() {
        let config = StationConfig::default();
        let help = HelpTexts::default();
        for room in RoomId::ALL {
            let text = help.render(room, &config);
            assert!(
                !text.contains("{room_title}") && !text.contains("{concurrency}"),
                "{room:?}"
            );
            assert!(text.starts_with("# "), "{room:?}");
        }
        assert!(help
            .render(RoomId::Lobby, &config)
            .contains("/execute_action{verb argument}"));
        assert!(help.render(RoomId::Mail, &config).contains("recipients"));
        assert!(help.welcome("Guest 1", 1000, &config).contains("1000 tokens"));
    }

    #[test]
    fn overrides_replace_builtins() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("codex.md"), "# Custom\n{common_ttl} ticks").unwrap();
        let help = HelpTexts::load(Some(dir.path())).unwrap();
        let config = StationConfig::default();
        assert_eq!(help.render(RoomId::Codex, &config), "# Custom\n5 ticks");
        assert!(help.render(RoomId::Test, &config).starts_with("# Test Chamber"));
    }
}
