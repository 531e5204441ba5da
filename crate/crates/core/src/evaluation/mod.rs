//! Background evaluation: evaluator bindings, the job state machine, the
//! worker pool, and result rendering.
//!
//! Workers never touch world state. They receive an immutable request and
//! send an [`EvalOutcome`] back over a channel; the tick loop decides when a
//! result becomes visible (see [`JobClock`]).

pub mod packing;
mod pool;
pub mod sandbox;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentId;

pub use packing::{verify_artifact, verify_exact, verify_packing, PackingError, PackingVerdict, Violation};
pub use pool::{WorkRequest, WorkResult, WorkerPool};
pub use sandbox::{ArtifactSchema, ExternalEvaluator, SandboxManifest, SandboxResult, SandboxVerdict};

/// Per-stream cap on log text included in result messages.
pub const LOG_EXCERPT_BYTES: usize = 16 * 1024;
pub const MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorBinding {
    /// Content is a flat list of 3n decimals; score is the sum of radii.
    CirclePacking {
        n: usize,
    },
    /// Content is a single number, echoed back as the score.
    Echo,
    /// Accepts any content without scoring it (general code submission).
    Record,
    External(ExternalEvaluator),
}

/// When a finished evaluation becomes visible to the tick loop.
///
/// `Logical` jobs complete after a fixed number of tick-equivalents, which
/// makes delivery independent of thread scheduling and keeps replays
/// byte-identical. `Wall` jobs complete whenever the worker finishes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobClock {
    #[default]
    Logical,
    Wall,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Scored,
    #[default]
    Invalid,
    Unscored,
    /// The submission raised an error; eligible for the debugger.
    Raised,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub verdict: Verdict,
    pub primary: Option<f64>,
    pub secondary: BTreeMap<String, f64>,
    pub stdout: String,
    pub stderr: String,
    pub error: Option<String>,
}

impl EvalOutcome {
    pub fn invalid(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        Self {
            verdict: Verdict::Invalid,
            stderr: reason.clone(),
            error: Some(reason),
            ..Self::default()
        }
    }

    fn raised(error: impl Into<String>) -> Self {
        let error = error.into();
        Self {
            verdict: Verdict::Raised,
            stderr: error.clone(),
            error: Some(error),
            ..Self::default()
        }
    }
}

pub(crate) fn score_packing(text: &str, n: usize, base: EvalOutcome) -> EvalOutcome {
    match packing::verify_artifact(text, n) {
        Ok(PackingVerdict::Valid { score, .. }) => {
            let mut secondary = base.secondary.clone();
            secondary.insert("circles".into(), n as f64);
            EvalOutcome {
                verdict: Verdict::Scored,
                primary: Some(score),
                secondary,
                stdout: format!("{}valid packing of {n} circles; sum of radii = {score}\n", base.stdout),
                ..base
            }
        }
        Ok(PackingVerdict::Invalid(v)) => EvalOutcome {
            verdict: Verdict::Invalid,
            error: Some(format!("invalid packing: {v}")),
            stderr: format!("{}invalid packing: {v}\n", base.stderr),
            ..base
        },
        Err(e @ PackingError::Parse { .. }) => EvalOutcome {
            verdict: Verdict::Raised,
            error: Some(format!("ValueError: {e}")),
            stderr: format!("{}ValueError: {e}\n", base.stderr),
            ..base
        },
        Err(e) => EvalOutcome {
            verdict: Verdict::Invalid,
            error: Some(e.to_string()),
            stderr: format!("{}{e}\n", base.stderr),
            ..base
        },
    }
}

/// Runs a built-in evaluator in-process. External bindings are handled by
/// the worker pool, which owns the scratch directories they need.
pub fn run_builtin(binding: &EvaluatorBinding, content: &str) -> EvalOutcome {
    match binding {
        EvaluatorBinding::CirclePacking { n } => score_packing(content, *n, EvalOutcome::default()),
        EvaluatorBinding::Echo => match content.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => EvalOutcome {
                verdict: Verdict::Scored,
                primary: Some(v),
                stdout: format!("echo: {v}\n"),
                ..EvalOutcome::default()
            },
            Ok(_) => EvalOutcome::invalid("score is not finite"),
            Err(_) => EvalOutcome::raised(format!(
                "ValueError: could not convert `{}` to a number",
                excerpt(content.trim(), 80)
            )),
        },
        EvaluatorBinding::Record => EvalOutcome {
            verdict: Verdict::Unscored,
            stdout: format!("received {} bytes\n", content.len()),
            ..EvalOutcome::default()
        },
        EvaluatorBinding::External(_) => EvalOutcome::invalid("external evaluator needs a sandbox"),
    }
}

fn excerpt(s: &str, max: usize) -> String {
    truncate_log(s, max).0
}

/// Truncates to at most `max` bytes at a char boundary. Returns whether
/// anything was cut.
pub fn truncate_log(s: &str, max: usize) -> (String, bool) {
    if s.len() <= max {
        return (s.to_string(), false);
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    (s[..end].to_string(), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Debugging,
    Finished,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationJob {
    /// Same as the submission id.
    pub id: u32,
    pub task_id: u32,
    pub author: AgentId,
    pub state: JobState,
    pub submitted_tick: u64,
    pub started_tick: u64,
    pub finished_tick: Option<u64>,
    pub attempt: u32,
    pub no_debugger: bool,
    pub clock: JobClock,
    /// Logical clock value at which the current attempt completes.
    pub due_wall: u64,
    /// Content the current attempt runs on.
    pub content: String,
}

impl EvaluationJob {
    pub fn is_active(&self) -> bool {
        matches!(self.state, JobState::Queued | JobState::Running | JobState::Debugging)
    }

    /// Age at the boundary before `tick`: submitted during T → age k before T+k.
    pub fn age_at(&self, tick: u64) -> u64 {
        tick.saturating_sub(self.submitted_tick)
    }

    pub fn transition(&mut self, to: JobState) -> Result<(), JobError> {
        use JobState::*;
        let ok = matches!(
            (self.state, to),
            (Queued, Running)
                | (Running, Finished)
                | (Running, Invalid)
                | (Running, Debugging)
                | (Debugging, Running)
                | (Debugging, Invalid)
        );
        if !ok || (to == Debugging && self.attempt >= MAX_ATTEMPTS) {
            return Err(JobError::IllegalTransition { from: self.state, to });
        }
        if self.state == Debugging && to == Running {
            self.attempt += 1;
        }
        self.state = to;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("illegal job transition {from:?} -> {to:?}")]
    IllegalTransition { from: JobState, to: JobState },
}

/// Input handed to the debugger: never the full task description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugRequest {
    pub code: String,
    pub error: String,
    pub signature: String,
}

/// Gate decision at a tick boundary: pause iff any active job is older than
/// `gate_ticks`.
pub fn gate_pauses(job_ages: impl IntoIterator<Item = u64>, gate_ticks: u64) -> bool {
    job_ages.into_iter().any(|age| age > gate_ticks)
}

/// Renders the system message for a finished job.
pub fn render_result_message(id: u32, title: &str, outcome: &EvalOutcome, attempt: u32, status_label: &str) -> String {
    let mut out = format!("Evaluation #{id} ({title}) finished: {status_label}.");
    if let Some(p) = outcome.primary {
        out.push_str(&format!("\nPrimary score: {p}"));
    }
    for (k, v) in &outcome.secondary {
        out.push_str(&format!("\n{k}: {v}"));
    }
    if attempt > 1 {
        out.push_str(
            "\nThe debugger repaired your submission; this result is for the repaired version (see `review`).",
        );
    }
    if let Some(e) = &outcome.error {
        out.push_str(&format!("\nError: {}", excerpt(e, 2000)));
    }
    for (name, log) in [("stdout", &outcome.stdout), ("stderr", &outcome.stderr)] {
        if log.trim().is_empty() {
            continue;
        }
        let (text, cut) = truncate_log(log, LOG_EXCERPT_BYTES);
        out.push_str(&format!("\n{name}:\n{}", text.trim_end()));
        if cut {
            out.push_str(&format!(
                "\n[{name} truncated at {LOG_EXCERPT_BYTES} bytes; use `review {id}` at the Research Counter for the full log]"
            ));
        }
    }
    out
}
