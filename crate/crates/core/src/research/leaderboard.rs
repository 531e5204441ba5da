use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::{ResearchBoard, ResearchError, Submission, SubmissionStatus};
use crate::agent::{AgentId, LineageId};
use crate::capsules::{parse_id_set, IdItem, IdSet};

pub const PREVIEW_ALL_LIMIT: usize = 100;
pub const DEFAULT_PAGE_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    #[default]
    Id,
    Score,
    Author,
}

impl std::str::FromStr for Ordering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "id" => Ok(Ordering::Id),
            "score" => Ok(Ordering::Score),
            "author" => Ok(Ordering::Author),
            other => Err(format!("unknown ordering `{other}` (use id, score, or author)")),
        }
    }
}

/// Per-agent table settings, kept on the agent record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardPrefs {
    pub ordering: Ordering,
    pub filter: Option<String>,
    pub page_size: usize,
}

impl Default for LeaderboardPrefs {
    fn default() -> Self {
        Self {
            ordering: Ordering::Id,
            filter: None,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl LeaderboardPrefs {
    pub fn set_page_size(&mut self, n: usize) -> Result<(), ResearchError> {
        if !(1..=200).contains(&n) {
            return Err(ResearchError::BadPageSize);
        }
        self.page_size = n;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardViewer {
    pub agent: AgentId,
    pub lineage: Option<LineageId>,
    pub mature: bool,
}

impl BoardViewer {
    pub fn sees(&self, s: &Submission) -> bool {
        self.mature || s.is_own(self.agent, self.lineage.as_ref())
    }
}

/// Every row the viewer may see, filtered and ordered (not paginated).
pub fn rows<'a>(board: &'a ResearchBoard, viewer: &BoardViewer, prefs: &LeaderboardPrefs) -> Vec<&'a Submission> {
    let filter = prefs.filter.as_ref().map(|f| f.to_lowercase());
    let mut rows: Vec<&Submission> = board
        .submissions()
        .filter(|s| viewer.sees(s))
        .filter(|s| match &filter {
            Some(tag) => s.tags.iter().any(|t| t.to_lowercase() == *tag),
            None => true,
        })
        .collect();
    match prefs.ordering {
        Ordering::Id => rows.sort_by_key(|s| Reverse(s.id)),
        Ordering::Score => rows.sort_by(|a, b| {
            let key = |s: &Submission| match (s.status, s.primary_score) {
                (SubmissionStatus::Scored, Some(v)) => Some(v),
                _ => None,
            };
            match (key(a), key(b)) {
                (Some(x), Some(y)) => y.total_cmp(&x).then(b.id.cmp(&a.id)),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => b.id.cmp(&a.id),
            }
        }),
        Ordering::Author => rows.sort_by_key(|s| (s.author != viewer.agent, Reverse(s.id))),
    }
    rows
}

pub fn render_table(board: &ResearchBoard, viewer: &BoardViewer, prefs: &LeaderboardPrefs) -> String {
    let all = rows(board, viewer, prefs);
    let mut out = format!(
        "Submitted Evaluations (sorted by {}, page size {}{}):\n",
        match prefs.ordering {
            Ordering::Id => "id",
            Ordering::Score => "score",
            Ordering::Author => "author",
        },
        prefs.page_size,
        prefs
            .filter
            .as_ref()
            .map(|f| format!(", filter `{f}`"))
            .unwrap_or_default()
    );
    if !viewer.mature {
        out.push_str("(Only your own lineage's submissions are shown until you reach maturity.)\n");
    }
    if all.is_empty() {
        out.push_str("(no submissions)\n");
        return out;
    }
    out.push_str("| id | task | title | author | score |\n|---|---|---|---|---|\n");
    for s in all.iter().take(prefs.page_size) {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            s.id,
            s.task_id,
            s.title.replace('|', "/"),
            s.author_name,
            s.score_label()
        ));
    }
    if all.len() > prefs.page_size {
        out.push_str(&format!("({} more rows not shown)\n", all.len() - prefs.page_size));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreviewRow<'a> {
    Visible(&'a Submission),
    Unavailable(u32),
}

pub fn preview<'a>(
    board: &'a ResearchBoard,
    viewer: &BoardViewer,
    expr: &str,
) -> Result<Vec<PreviewRow<'a>>, ResearchError> {
    let set = parse_id_set(expr).map_err(ResearchError::MalformedRange)?;
    Ok(match set {
        IdSet::All => board
            .submissions()
            .rev()
            .filter(|s| viewer.sees(s))
            .take(PREVIEW_ALL_LIMIT)
            .map(PreviewRow::Visible)
            .collect(),
        IdSet::Items(items) => {
            let mut out = Vec::new();
            for item in items {
                let IdItem::Capsule(id) = item else {
                    return Err(ResearchError::MalformedRange(format!(
                        "`{item}` is not an evaluation id"
                    )));
                };
                out.push(match board.get(id).filter(|s| viewer.sees(s)) {
                    Some(s) => PreviewRow::Visible(s),
                    None => PreviewRow::Unavailable(id),
                });
            }
            out
        }
    })
}

pub fn render_preview(rows: &[PreviewRow<'_>]) -> String {
    if rows.is_empty() {
        return "No submissions.".into();
    }
    rows.iter()
        .map(|r| match r {
            PreviewRow::Visible(s) => format!(
                "#{} {} (task {}, by {}, score {})\n  tags: {}\n  abstract: {}",
                s.id,
                s.title,
                s.task_id,
                s.author_name,
                s.score_label(),
                s.tags.join(", "),
                s.abstract_text
            ),
            PreviewRow::Unavailable(id) => format!("#{id}: unavailable"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Best scored primary score for a task, if any.
pub fn best_score(board: &ResearchBoard, task_id: u32) -> Option<f64> {
    board
        .submissions()
        .filter(|s| s.task_id == task_id && s.status == SubmissionStatus::Scored)
        .filter_map(|s| s.primary_score)
        .max_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::research::{SubmissionDraft, Submitter, TaskSpec};

    fn board_with(scores: &[(u64, Option<f64>, bool, &str)]) -> ResearchBoard {
        let task: TaskSpec = serde_json::from_value(serde_json::json!({
            "id": 1, "title": "t", "description": "d", "evaluator": {"kind": "echo"}
        }))
        .unwrap();
        let mut board = ResearchBoard::new(vec![task]);
        let read = BTreeSet::from([1]);
        for (author, score, finished, tag) in scores {
            let who = Submitter {
                agent: AgentId(*author),
                name: format!("A{author}"),
                lineage: Some(LineageId(format!("l{author}"))),
                read_tasks: &read,
            };
            let id = board
                .submit(
                    &who,
                    Some(1),
                    SubmissionDraft {
                        title: "x".into(),
                        tags: vec![tag.to_string()],
                        abstract_text: "a".into(),
                        content: "c".into(),
                        no_debugger: false,
                    },
                    99,
                    0,
                )
                .unwrap();
            let s = board.get_mut(id).unwrap();
            if *finished {
                match score {
                    Some(v) => {
                        s.status = SubmissionStatus::Scored;
                        s.primary_score = Some(*v);
                    }
                    None => s.status = SubmissionStatus::Invalid,
                }
            }
        }
        board
    }

    fn mature(agent: u64) -> BoardViewer {
        BoardViewer {
            agent: AgentId(agent),
            lineage: Some(LineageId(format!("l{agent}"))),
            mature: true,
        }
    }

    #[test]
    fn score_order_puts_pending_last() {
        // ids 1..4: 3.1, n.a., 2.9, running
        let board = board_with(&[
            (1, Some(3.1), true, "a"),
            (1, None, true, "a"),
            (2, Some(2.9), true, "b"),
            (2, None, false, "b"),
        ]);
        let prefs = LeaderboardPrefs {
            ordering: Ordering::Score,
            ..Default::default()
        };
        let ids: Vec<u32> = rows(&board, &mature(1), &prefs).iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![1, 3, 4, 2]);
    }

    #[test]
    fn ties_prefer_newest_and_filter_works() {
        let board = board_with(&[
            (1, Some(1.0), true, "opt"),
            (2, Some(1.0), true, "Opt"),
            (3, Some(0.5), true, "x"),
        ]);
        let mut prefs = LeaderboardPrefs {
            ordering: Ordering::Score,
            filter: Some("opt".into()),
            ..Default::default()
        };
        let ids: Vec<u32> = rows(&board, &mature(9), &prefs).iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![2, 1]);
        prefs.filter = None;
        prefs.ordering = Ordering::Author;
        let ids: Vec<u32> = rows(&board, &mature(1), &prefs).iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![1, 3, 2]);
        assert!(prefs.set_page_size(0).is_err());
        assert!(prefs.set_page_size(201).is_err());
        assert!(prefs.set_page_size(200).is_ok());
    }

    #[test]
    fn immature_viewer_sees_only_own_lineage() {
        let board = board_with(&[(1, Some(1.0), true, "a"), (2, Some(2.0), true, "a")]);
        let young = BoardViewer {
            mature: false,
            ..mature(1)
        };
        let visible = rows(&board, &young, &LeaderboardPrefs::default());
        assert_eq!(visible.len(), 1);
        let p = preview(&board, &young, "1:2").unwrap();
        assert!(matches!(p[1], PreviewRow::Unavailable(2)));
        assert!(matches!(
            board.review(&young, 2),
            Err(ResearchError::ImmatureRestricted(2))
        ));
        assert_eq!(best_score(&board, 1), Some(2.0));
    }

    #[test]
    fn preview_all_is_latest_hundred() {
        let entries: Vec<(u64, Option<f64>, bool, &str)> = (0..120).map(|_| (1, Some(1.0), true, "a")).collect();
        let board = board_with(&entries);
        let p = preview(&board, &mature(1), "all").unwrap();
        assert_eq!(p.len(), 100);
        assert!(matches!(p[0], PreviewRow::Visible(s) if s.id == 120));
    }
}
