//! What an agent sees of a room: rendered fresh each turn from world state.

use super::actions::check_entry;
use super::RoomId;
use crate::agent::{AgentRecord, EntryKind};
use crate::capsules::{self, CapsuleRoom};
use crate::config::StationConfig;
use crate::kernel::world::{board_viewer_of, viewer_of, World};
use crate::research;

/// Capsule previews shown in a room observation (newest first).
pub const OBSERVED_CAPSULES: usize = 20;

pub fn observe(world: &World, agent: &AgentRecord, room: RoomId, config: &StationConfig, tick: u64) -> String {
    if let Err(e) = check_entry(agent, room, config) {
        return format!("You cannot see into this room: {e}.");
    }
    match room {
        RoomId::Lobby => lobby(world, agent),
        RoomId::Codex => config.codex_text.trim_end().to_string(),
        RoomId::Test => {
            let mut out = config.entry_test.render();
            out.push_str(&format!(
                "\nYour entry test: {}.",
                if agent.test_passed { "passed" } else { "not passed" }
            ));
            if agent.test_passed && agent.identity.is_none() {
                let open: Vec<&str> = world
                    .lineages
                    .available_for(&agent.backend_id)
                    .map(|l| l.name.as_str())
                    .collect();
                out.push_str(&format!(
                    "\nLineages you could inherit: {}",
                    if open.is_empty() {
                        "none".to_string()
                    } else {
                        open.join(", ")
                    }
                ));
            }
            out
        }
        RoomId::Reflect => format!(
            "A quiet room. `reflect` opens a session of up to {} exchanges.",
            config.reflection_max_ticks
        ),
        RoomId::PrivateMemory | RoomId::PublicMemory | RoomId::Archive | RoomId::Mail => capsule_room(
            world,
            agent,
            CapsuleRoom::from_room(room).expect("capsule room"),
            config,
        ),
        RoomId::Common => {
            let recent: Vec<String> = world
                .common
                .iter()
                .filter(|m| m.tick + config.common_ttl_ticks > tick)
                .map(|m| format!("[tick {}] {}: {}", m.tick, m.name, m.text.trim_end()))
                .collect();
            if recent.is_empty() {
                "No recent messages.".into()
            } else {
                recent.join("\n")
            }
        }
        RoomId::Research => {
            let mut out = String::from("Tasks:\n");
            if world.board.tasks.is_empty() {
                out.push_str("(none)\n");
            }
            for t in &world.board.tasks {
                let read = if agent.read_tasks.contains(&t.id) {
                    ""
                } else {
                    " (unread)"
                };
                out.push_str(&format!("Task {}: {}{read}\n", t.id, t.title));
            }
            let running = world.board.running_for(agent.id);
            out.push_str(&format!(
                "Your running evaluations: {running} of {}\n\n",
                config.eval_concurrency_per_agent
            ));
            let bv = board_viewer_of(agent, config.maturity_age_ticks);
            out.push_str(&research::render_table(&world.board, &bv, &agent.leaderboard));
            out
        }
        RoomId::TokenManagement => {
            let mut out = format!(
                "Tokens used: {} of {} ({} input, {} output).\nStored context: {} entries, {} bytes.\n",
                agent.ledger.used(),
                agent.ledger.budget,
                agent.ledger.cumulative_in,
                agent.ledger.cumulative_out,
                agent.context.entries().len(),
                agent.context.stored_bytes()
            );
            for e in agent.context.entries() {
                let kind = match &e.kind {
                    EntryKind::Turn => "turn".to_string(),
                    EntryKind::Reflection => "reflection".to_string(),
                    EntryKind::Summary { first, last } => format!("summary of {first}:{last}"),
                };
                out.push_str(&format!("- {} (tick {}, {kind}): {} bytes\n", e.seq, e.tick, e.len()));
            }
            out
        }
        RoomId::External => {
            let mine = world.outbox.iter().filter(|r| r.agent == agent.id).count();
            format!("The operators read messages left here. You have sent {mine}.")
        }
        RoomId::Exit => "Leaving is permanent. `confirm` here to depart.".into(),
    }
}

fn lobby(world: &World, agent: &AgentRecord) -> String {
    let mut present: Vec<String> = world
        .agents
        .values()
        .filter(|a| a.location == RoomId::Lobby && a.id != agent.id)
        .map(AgentRecord::display_name)
        .collect();
    present.sort();
    format!(
        "Rooms: {}.\nAgents in the Station: {}. Also here: {}.",
        RoomId::ALL
            .iter()
            .filter(|r| **r != RoomId::Lobby)
            .map(|r| r.key())
            .collect::<Vec<_>>()
            .join(", "),
        world.agents.len() + usize::from(!world.agents.contains_key(&agent.id)),
        if present.is_empty() {
            "nobody".to_string()
        } else {
            present.join(", ")
        }
    )
}

fn capsule_room(world: &World, agent: &AgentRecord, room: CapsuleRoom, config: &StationConfig) -> String {
    let viewer = viewer_of(agent, config.maturity_age_ticks);
    let mut out = String::new();
    if room == CapsuleRoom::Mail {
        let mut names: Vec<String> = world
            .agents
            .values()
            .filter(|a| a.id != agent.id)
            .map(AgentRecord::display_name)
            .collect();
        names.sort();
        out.push_str(&format!(
            "Directory: {}\n",
            if names.is_empty() {
                "(none)".to_string()
            } else {
                names.join(", ")
            }
        ));
    }
    let mut visible: Vec<&capsules::Capsule> = world
        .capsules
        .visible(room, &viewer)
        .filter(|c| c.status != capsules::CapsuleStatus::Deleted)
        .collect();
    visible.sort_by_key(|c| std::cmp::Reverse((c.updated_tick, c.id)));
    if visible.is_empty() {
        out.push_str("No capsules yet.");
        return out;
    }
    let ids: Vec<String> = visible
        .iter()
        .take(OBSERVED_CAPSULES)
        .map(|c| c.id.to_string())
        .collect();
    match world.capsules.preview(&viewer, room, &ids.join(",")) {
        Ok(entries) => out.push_str(&capsules::render_preview(&entries)),
        Err(e) => out.push_str(&e.to_string()),
    }
    if visible.len() > OBSERVED_CAPSULES {
        out.push_str(&format!(
            "\n({} older capsules; use `preview all`)",
            visible.len() - OBSERVED_CAPSULES
        ));
    }
    out
}
