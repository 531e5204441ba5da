//! Station-level oversight: the archive reviewer's dialogue log and the
//! stagnation protocol.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::roman;
use crate::backends::ReviewTurn;
use crate::research::format_score;

/// Improvement history of one scored task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub best: Option<f64>,
    /// Boundary tick of the last improvement (or of the last announcement).
    pub last_mark: Option<u64>,
    pub announcements: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub tick: u64,
    pub task_id: u32,
    pub ordinal: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GovernanceState {
    pub progress: BTreeMap<u32, TaskProgress>,
    pub review_log: Vec<ReviewTurn>,
    pub announcements: Vec<Announcement>,
}

impl GovernanceState {
    /// Records a score delivered at the boundary before `tick`. The first
    /// score arms the task; later scores count only if strictly better.
    /// Returns whether the best improved.
    pub fn record_score(&mut self, task_id: u32, score: f64, tick: u64) -> bool {
        let p = self.progress.entry(task_id).or_default();
        if p.best.is_none_or(|b| score > b) {
            p.best = Some(score);
            p.last_mark = Some(tick);
            true
        } else {
            false
        }
    }

    /// Stagnation check at the boundary before `tick`: a task fires once
    /// `threshold` ticks have passed since its last mark, after which the
    /// mark moves to `tick`.
    pub fn check_stagnation(&mut self, tick: u64, threshold: u64, titles: &BTreeMap<u32, String>) -> Vec<Announcement> {
        let mut fired = Vec::new();
        for (&task_id, p) in self.progress.iter_mut() {
            let Some(mark) = p.last_mark else { continue };
            if tick.saturating_sub(mark) < threshold {
                continue;
            }
            p.announcements += 1;
            p.last_mark = Some(tick);
            let title = titles.get(&task_id).map(String::as_str).unwrap_or("research task");
            let best = p.best.map(format_score).unwrap_or_else(|| "none".into());
            let text = format!(
                "Stagnation Protocol {}\n\nTask {task_id} ({title}) has gone {} ticks without a better score \
                 (best so far: {best}). Incremental tweaks have stopped paying off. Step back, question the \
                 shared assumptions behind the current approaches, and try something structurally different.",
                roman(p.announcements),
                tick - mark,
            );
            fired.push(Announcement {
                tick,
                task_id,
                ordinal: p.announcements,
                text,
            });
        }
        self.announcements.extend(fired.iter().cloned());
        fired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fires_at_threshold_and_rearms() {
        let mut g = GovernanceState::default();
        let titles = BTreeMap::new();
        assert!(
            g.check_stagnation(500, 100, &titles).is_empty(),
            "unarmed before first score"
        );
        assert!(g.record_score(1, 0.5, 10));
        assert!(!g.record_score(1, 0.5, 20), "ties are not improvements");
        assert!(g.check_stagnation(109, 100, &titles).is_empty());
        let a = g.check_stagnation(110, 100, &titles);
        assert_eq!(a.len(), 1);
        assert!(a[0].text.starts_with("Stagnation Protocol I\n"));
        assert!(g.check_stagnation(111, 100, &titles).is_empty());
        let b = g.check_stagnation(210, 100, &titles);
        assert!(b[0].text.starts_with("Stagnation Protocol II\n"));
        g.record_score(1, 0.6, 250);
        assert!(g.check_stagnation(310, 100, &titles).is_empty());
        assert_eq!(g.check_stagnation(350, 100, &titles).len(), 1);
    }
}
