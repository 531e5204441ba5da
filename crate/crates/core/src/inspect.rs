//! Operator views of a world: leaderboards, capsule listings, agent
//! summaries. Shared by the CLI and the C API.

use crate::agent::AgentId;
use crate::capsules::{CapsuleRoom, CapsuleStatus};
use crate::config::StationConfig;
use crate::kernel::world::board_viewer_of;
use crate::kernel::World;
use crate::research::{render_table, BoardViewer, LeaderboardPrefs, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// The operator's leaderboard (everything, best first), or the table as
    /// a given agent sees it at the Research Counter.
    Leaderboard {
        agent: Option<AgentId>,
        rows: usize,
    },
    Capsules(CapsuleRoom),
    Agents,
    Status,
}

pub fn render(world: &World, config: &StationConfig, view: View) -> Result<String, String> {
    let mut out = String::new();
    match view {
        View::Leaderboard { agent, rows } => {
            let (viewer, prefs) = match agent {
                Some(id) => {
                    let a = world.agents.get(&id).ok_or_else(|| format!("no live agent {}", id.0))?;
                    (board_viewer_of(a, config.maturity_age_ticks), a.leaderboard.clone())
                }
                None => (
                    BoardViewer {
                        agent: AgentId(0),
                        lineage: None,
                        mature: true,
                    },
                    LeaderboardPrefs {
                        ordering: Ordering::Score,
                        filter: None,
                        page_size: rows.max(1),
                    },
                ),
            };
            out.push_str(&render_table(&world.board, &viewer, &prefs));
        }
        View::Capsules(room) => {
            for c in world.capsules.all(room) {
                if c.status == CapsuleStatus::Deleted {
                    continue;
                }
                out.push_str(&format!(
                    "#{} [{:?}] {} by {} (tick {}, {} messages)\n",
                    c.id,
                    c.status,
                    c.title,
                    c.author.name,
                    c.created_tick,
                    c.live_messages().count()
                ));
            }
            if out.is_empty() {
                out.push_str("(no capsules)\n");
            }
        }
        View::Agents => {
            out.push_str("slot | agent | name | backend | age | tokens used | location\n");
            for id in &world.slots {
                let Some(a) = world.agents.get(id) else { continue };
                out.push_str(&format!(
                    "{} | {} | {} | {} | {} | {} of {} | {}\n",
                    a.slot,
                    a.id.0,
                    a.display_name(),
                    a.backend_id,
                    a.age_ticks,
                    a.ledger.used(),
                    a.ledger.budget,
                    a.location.key()
                ));
            }
            out.push_str(&format!("{} agents have departed.\n", world.departed.len()));
        }
        View::Status => {
            out.push_str(&format!(
                "tick {}\nwall {}\nphase {:?}\nlive agents {}\ndeparted agents {}\nsubmissions {}\nrunning evaluations {}\ntranscript records {}\n",
                world.tick,
                world.wall,
                world.phase,
                world.agents.len(),
                world.departed.len(),
                world.board.submissions().count(),
                world.jobs.values().filter(|j| j.is_active()).count(),
                world.transcript.records
            ));
            for (task, p) in &world.governance.progress {
                if let Some(best) = p.best {
                    out.push_str(&format!("task {task} best {best}\n"));
                }
            }
        }
    }
    Ok(out)
}
