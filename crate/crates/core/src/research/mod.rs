//! The Research Counter: task distribution, submission intake, leaderboard
//! views, and tiered storage.

mod leaderboard;
pub mod storage;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{FieldKind, FieldSpec, Fields};
use crate::agent::{AgentId, LineageId};
use crate::evaluation::{EvaluatorBinding, JobClock};

pub use leaderboard::{
    best_score, preview, render_preview, render_table, rows, BoardViewer, LeaderboardPrefs, Ordering, PreviewRow,
    PREVIEW_ALL_LIMIT,
};
pub use storage::{Storage, StorageActor, StorageError, Tier};

pub const MAX_TAGS: usize = 6;
pub const MAX_ABSTRACT_WORDS: usize = 100;

pub const SUBMIT: &[FieldSpec] = &[
    FieldSpec::required("title", FieldKind::Text),
    FieldSpec::required("tags", FieldKind::List),
    FieldSpec::required("abstract", FieldKind::Text),
    FieldSpec::required("content", FieldKind::Text),
    FieldSpec::optional("no_debugger", FieldKind::Bool),
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceProfile {
    #[serde(default)]
    pub workers: Option<u32>,
    #[serde(default)]
    pub device_class: Option<String>,
}

fn default_time_limit() -> u64 {
    60
}
fn default_true() -> bool {
    true
}
fn default_duration() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: u32,
    pub title: String,
    pub description: String,
    pub evaluator: EvaluatorBinding,
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: u64,
    #[serde(default)]
    pub resource_profile: ResourceProfile,
    #[serde(default)]
    pub baseline_refs: Vec<String>,
    #[serde(default = "default_true")]
    pub scored: bool,
    /// Entry-point signature shown to the debugger.
    #[serde(default)]
    pub signature: String,
    /// Logical evaluation length in ticks (logical clock only).
    #[serde(default = "default_duration")]
    pub logical_duration_ticks: u64,
    #[serde(default)]
    pub clock: JobClock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionStatus {
    Running,
    Scored,
    Invalid,
    /// Finished on a task without a primary score.
    Unscored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub id: u32,
    pub task_id: u32,
    pub author: AgentId,
    pub author_name: String,
    pub lineage: Option<LineageId>,
    pub title: String,
    pub tags: Vec<String>,
    pub abstract_text: String,
    pub content: String,
    pub no_debugger: bool,
    pub submitted_tick: u64,
    pub status: SubmissionStatus,
    pub primary_score: Option<f64>,
    pub secondary_metrics: BTreeMap<String, f64>,
    pub stdout: String,
    pub stderr: String,
    /// Debugger-repaired content, when the debugger ran.
    pub fixed_content: Option<String>,
    /// Which attempt produced the final verdict (1 = original).
    pub final_attempt: u32,
    pub finished_tick: Option<u64>,
}

impl Submission {
    pub fn score_label(&self) -> String {
        match self.status {
            SubmissionStatus::Running => "running".into(),
            SubmissionStatus::Invalid => "n.a.".into(),
            SubmissionStatus::Unscored => "done".into(),
            SubmissionStatus::Scored => match self.primary_score {
                Some(s) => format_score(s),
                None => "n.a.".into(),
            },
        }
    }

    pub fn is_own(&self, agent: AgentId, lineage: Option<&LineageId>) -> bool {
        self.author == agent || (lineage.is_some() && self.lineage.as_ref() == lineage)
    }

    pub fn render_review(&self) -> String {
        let mut out = format!(
            "# Evaluation #{} — {}\nTask: {} | Author: {} | Submitted: tick {} | Score: {}\nTags: {}\nAbstract: {}\n",
            self.id,
            self.title,
            self.task_id,
            self.author_name,
            self.submitted_tick,
            self.score_label(),
            self.tags.join(", "),
            self.abstract_text
        );
        if !self.secondary_metrics.is_empty() {
            out.push_str("Secondary metrics:\n");
            for (k, v) in &self.secondary_metrics {
                out.push_str(&format!("- {k}: {}\n", format_score(*v)));
            }
        }
        out.push_str(&format!("\n## Submitted content\n\n{}\n", self.content.trim_end()));
        if let Some(fixed) = &self.fixed_content {
            out.push_str(&format!(
                "\n## Debugger-repaired content (attempt {})\n\n{}\n",
                self.final_attempt,
                fixed.trim_end()
            ));
        }
        out.push_str(&format!("\n## stdout\n\n{}\n", or_empty(&self.stdout)));
        out.push_str(&format!("\n## stderr\n\n{}\n", or_empty(&self.stderr)));
        out
    }
}

fn or_empty(s: &str) -> &str {
    if s.trim().is_empty() {
        "(empty)"
    } else {
        s.trim_end()
    }
}

/// Shortest representation that round-trips the score.
pub fn format_score(s: f64) -> String {
    format!("{s}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResearchError {
    #[error("no research task with id {0}")]
    UnknownTask(u32),
    #[error("there are no research tasks in this Station")]
    NoTasks,
    #[error("you must read task {0} before submitting (use `read {0}`)")]
    MustReadTaskFirst(u32),
    #[error("you already have {0} evaluation(s) running; wait for one to finish")]
    ConcurrencyCap(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("evaluation #{0} is still running")]
    StillRunning(u32),
    #[error("evaluation #{0} belongs to another lineage and is hidden until you reach maturity")]
    ImmatureRestricted(u32),
    #[error("no evaluation with id {0}")]
    UnknownEvaluation(u32),
    #[error("page size must be between 1 and 200")]
    BadPageSize,
    #[error("{0}")]
    MalformedRange(String),
}

#[derive(Debug, Clone)]
pub struct SubmissionDraft {
    pub title: String,
    pub tags: Vec<String>,
    pub abstract_text: String,
    pub content: String,
    pub no_debugger: bool,
}

impl SubmissionDraft {
    pub fn from_fields(fields: &Fields) -> Result<Self, ResearchError> {
        let tags: Vec<String> = fields.list("tags").map(<[String]>::to_vec).unwrap_or_default();
        if tags.is_empty() || tags.len() > MAX_TAGS {
            return Err(ResearchError::Invalid(format!(
                "tags must list between 1 and {MAX_TAGS} entries (got {})",
                tags.len()
            )));
        }
        let abstract_text = fields.text("abstract").unwrap_or_default().to_string();
        let words = abstract_text.split_whitespace().count();
        if words > MAX_ABSTRACT_WORDS {
            return Err(ResearchError::Invalid(format!(
                "abstract has {words} words; the limit is {MAX_ABSTRACT_WORDS}"
            )));
        }
        Ok(Self {
            title: fields.text("title").unwrap_or_default().to_string(),
            tags,
            abstract_text,
            content: fields.text("content").unwrap_or_default().to_string(),
            no_debugger: fields.flag("no_debugger").unwrap_or(false),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Submitter<'a> {
    pub agent: AgentId,
    pub name: String,
    pub lineage: Option<LineageId>,
    pub read_tasks: &'a std::collections::BTreeSet<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResearchBoard {
    pub tasks: Vec<TaskSpec>,
    submissions: BTreeMap<u32, Submission>,
    next_id: u32,
}

impl ResearchBoard {
    pub fn new(tasks: Vec<TaskSpec>) -> Self {
        Self {
            tasks,
            submissions: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn task(&self, id: u32) -> Result<&TaskSpec, ResearchError> {
        self.tasks
            .iter()
            .find(|t| t.id == id)
            .ok_or(ResearchError::UnknownTask(id))
    }

    /// `submit` without an id targets the most recent task.
    pub fn resolve_task(&self, id: Option<u32>) -> Result<&TaskSpec, ResearchError> {
        match id {
            Some(id) => self.task(id),
            None => self.tasks.iter().max_by_key(|t| t.id).ok_or(ResearchError::NoTasks),
        }
    }

    pub fn submissions(&self) -> impl DoubleEndedIterator<Item = &Submission> {
        self.submissions.values()
    }

    pub fn get(&self, id: u32) -> Option<&Submission> {
        self.submissions.get(&id)
    }

    pub fn get_mut(&mut self, id: u32) -> Option<&mut Submission> {
        self.submissions.get_mut(&id)
    }

    pub fn running_for(&self, agent: AgentId) -> usize {
        self.submissions
            .values()
            .filter(|s| s.author == agent && s.status == SubmissionStatus::Running)
            .count()
    }

    pub fn submit(
        &mut self,
        who: &Submitter<'_>,
        task_id: Option<u32>,
        draft: SubmissionDraft,
        concurrency_cap: usize,
        tick: u64,
    ) -> Result<u32, ResearchError> {
        let task_id = self.resolve_task(task_id)?.id;
        if !who.read_tasks.contains(&task_id) {
            return Err(ResearchError::MustReadTaskFirst(task_id));
        }
        let running = self.running_for(who.agent);
        if running >= concurrency_cap {
            return Err(ResearchError::ConcurrencyCap(running));
        }
        self.next_id = self.next_id.max(1);
        let id = self.next_id;
        self.next_id += 1;
        self.submissions.insert(
            id,
            Submission {
                id,
                task_id,
                author: who.agent,
                author_name: who.name.clone(),
                lineage: who.lineage.clone(),
                title: draft.title,
                tags: draft.tags,
                abstract_text: draft.abstract_text,
                content: draft.content,
                no_debugger: draft.no_debugger,
                submitted_tick: tick,
                status: SubmissionStatus::Running,
                primary_score: None,
                secondary_metrics: BTreeMap::new(),
                stdout: String::new(),
                stderr: String::new(),
                fixed_content: None,
                final_attempt: 1,
                finished_tick: None,
            },
        );
        Ok(id)
    }

    pub fn review(&self, viewer: &BoardViewer, id: u32) -> Result<&Submission, ResearchError> {
        let sub = self.get(id).ok_or(ResearchError::UnknownEvaluation(id))?;
        if !viewer.mature && !sub.is_own(viewer.agent, viewer.lineage.as_ref()) {
            return Err(ResearchError::ImmatureRestricted(id));
        }
        if sub.status == SubmissionStatus::Running {
            return Err(ResearchError::StillRunning(id));
        }
        Ok(sub)
    }
}
