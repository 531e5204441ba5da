//! The tick loop: the only writer of world state.
//!
//! One call to [`Station::advance_tick`] runs tick `T = world.tick + 1`:
//!
//! 1. Boundary work: deliver finished evaluations (running the debugger once
//!    for submissions that raised), hold the clock while the evaluation gate
//!    is closed, review pending archive papers, check for stagnation, and
//!    expire old common-room chatter.
//! 2. One turn per slot, in slot order.
//! 3. Lifecycle: retire agents that left, ran out of tokens, or reached the
//!    life limit, and spawn a replacement into each vacated slot.
//!
//! Evaluations on the logical clock finish at a fixed `wall` value, so
//! deliveries do not depend on worker timing and runs replay exactly.

pub mod transcript;
pub mod world;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::{parse_response_with, ParseOptions, ParseOutcome};
use crate::agent::prompt::reflection_prompt;
use crate::agent::{
    estimate_tokens, ActionRecord, AgentId, AgentRecord, EntryKind, MessageKind, PromptBundle, SystemMessage,
};
use crate::backends::{
    AgentBackend, BackendError, BackendRegistry, ReviewDecision, ReviewSubmission, ReviewTurn, TurnKind, TurnRequest,
};
use crate::capsules::{CapsuleRoom, CapsuleStatus};
use crate::config::{ConfigError, StationConfig};
use crate::evaluation::{
    gate_pauses, render_result_message, DebugRequest, EvalOutcome, EvaluationJob, EvaluatorBinding, JobClock, JobState,
    Verdict, WorkRequest, WorkerPool,
};
use crate::research::{ResearchBoard, Storage, SubmissionStatus};
use crate::rooms::{self, observe, ActionEnv, Effect, HelpTexts, RoomId, RoomObservation};

use transcript::{Stream, TranscriptSink};
pub use world::{
    CommonMessage, DepartedAgent, LifecycleEvent, LifecycleKind, OutboxRecord, Phase, TranscriptHead, Undelivered,
    World,
};

/// Upper bound on invocations executed from one response.
pub const MAX_INVOCATIONS: usize = 32;

#[derive(Debug, Error)]
pub enum StationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("backend setup failed: {0}")]
    Backend(#[from] BackendError),
    #[error("no backend registered for `{0}`")]
    MissingBackend(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("the run has reached its tick limit ({0})")]
    Halted(u64),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Construction options that are not part of the run manifest.
#[derive(Default)]
pub struct StationOptions {
    /// Where transcripts are written (none: hash chain only).
    pub transcript_dir: Option<PathBuf>,
    /// Scratch space for external evaluators (none: a temporary directory).
    pub scratch_dir: Option<PathBuf>,
    /// Use these backends instead of instantiating the manifest's bindings.
    pub backends: Option<BackendRegistry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnSummary {
    pub slot: usize,
    pub agent: AgentId,
    pub name: String,
    pub degraded: bool,
    pub actions: Vec<ActionRecord>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub reflections: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delivery {
    pub evaluation: u32,
    pub author: AgentId,
    pub status: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickReport {
    pub tick: u64,
    /// Logical clock value once the tick completed.
    pub wall: u64,
    pub pause_steps: u32,
    pub deliveries: Vec<Delivery>,
    pub reviews: Vec<(u32, ReviewDecision)>,
    pub stagnation: Vec<u32>,
    pub turns: Vec<TurnSummary>,
    pub lifecycle: Vec<LifecycleEvent>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TickRecord<'a> {
    Delivery {
        tick: u64,
        wall: u64,
        evaluation: u32,
        attempt: u32,
        author: AgentId,
        status: &'a str,
        score: Option<f64>,
    },
    Debugger {
        tick: u64,
        wall: u64,
        evaluation: u32,
        repaired: bool,
    },
    Pause {
        tick: u64,
        wall: u64,
        step: u32,
        waiting_on: Vec<u32>,
    },
    Stagnation {
        tick: u64,
        task: u32,
        ordinal: u32,
    },
    Turn {
        tick: u64,
        wall: u64,
        slot: usize,
        agent: AgentId,
        name: &'a str,
        location: RoomId,
        degraded: bool,
        tokens_in: u64,
        tokens_out: u64,
        reflections: u32,
        actions: &'a [ActionRecord],
    },
    Lifecycle {
        tick: u64,
        agent: AgentId,
        slot: usize,
        kind: LifecycleKind,
    },
    TickEnd {
        tick: u64,
        wall: u64,
        live: usize,
    },
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum AgentLog<'a> {
    Spawned {
        tick: u64,
        slot: usize,
        backend: &'a str,
    },
    Turn {
        tick: u64,
        seq: u64,
        prompt: &'a str,
        response: &'a str,
        parse: &'a ParseOutcome,
        results: &'a [ActionRecord],
        tokens_in: u64,
        tokens_out: u64,
    },
    Reflection {
        tick: u64,
        seq: u64,
        k: u32,
        n: u32,
        prompt: &'a str,
        response: &'a str,
        tokens_in: u64,
        tokens_out: u64,
    },
    Degraded {
        tick: u64,
        prompt: &'a str,
        error: String,
    },
    Departed {
        tick: u64,
        reason: LifecycleKind,
    },
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ReviewerLog<'a> {
    Review {
        tick: u64,
        capsule: u32,
        attempt: u32,
        prompt: &'a str,
        response: &'a str,
        decision: ReviewDecision,
    },
    Failed {
        tick: u64,
        capsule: u32,
        error: String,
    },
}

/// Per-agent seed: splitmix64 over the run seed mixed with the agent id.
pub fn agent_seed(rng_seed: u64, agent: AgentId) -> u64 {
    let mut z = rng_seed ^ agent.0.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Content digest of the full world state, storage included.
pub fn world_digest(world: &World) -> String {
    #[derive(Serialize)]
    struct Digestible<'a> {
        world: &'a World,
        storage: BTreeMap<String, (String, u64)>,
    }
    let json = serde_json::to_string(&Digestible {
        world,
        storage: world.storage.index(),
    })
    .expect("world state serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn status_label(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Scored => "scored",
        Verdict::Unscored => "done",
        Verdict::Invalid => "invalid",
        Verdict::Raised => "failed with an error",
        Verdict::Timeout => "timed out",
    }
}

pub struct Station {
    config: StationConfig,
    world: World,
    backends: BackendRegistry,
    pool: WorkerPool,
    help: HelpTexts,
    sink: TranscriptSink,
}

impl Station {
    pub fn new(config: StationConfig, opts: StationOptions) -> Result<Self, StationError> {
        config.validate()?;
        let mut storage = Storage::new(config.storage_quota_bytes);
        for (path, content) in &config.seed_storage {
            storage
                .seed(path, content.clone(), 0)
                .map_err(|e| ConfigError::Invalid(format!("seed_storage `{path}`: {e}")))?;
        }
        let world = World::new(ResearchBoard::new(config.task_specs.clone()), storage);
        let mut station = Self::assemble(config, world, opts, 0)?;
        for slot in 0..station.config.agent_count {
            station.world.slots.push(AgentId(0));
            station.spawn(slot, 1, 0)?;
        }
        Ok(station)
    }

    /// Continues a run from restored state. Evaluations that were in flight
    /// are dispatched again; external evaluators see storage as restored.
    pub fn from_world(config: StationConfig, world: World, opts: StationOptions) -> Result<Self, StationError> {
        config.validate()?;
        let keep = world.transcript.records;
        let station = Self::assemble(config, world, opts, keep)?;
        if station.world.agents.len() != station.config.agent_count {
            return Err(StationError::Invariant(format!(
                "restored world has {} agents but the manifest expects {}",
                station.world.agents.len(),
                station.config.agent_count
            )));
        }
        let active: Vec<u32> = station
            .world
            .jobs
            .values()
            .filter(|j| j.is_active())
            .map(|j| j.id)
            .collect();
        for id in active {
            station.dispatch(id);
        }
        Ok(station)
    }

    fn assemble(config: StationConfig, world: World, opts: StationOptions, keep: u64) -> Result<Self, StationError> {
        let backends = match opts.backends {
            Some(b) => b,
            None => BackendRegistry::from_bindings(&config.backends)?,
        };
        for id in &config.slots {
            if backends.agent(id).is_none() {
                return Err(StationError::MissingBackend(id.clone()));
            }
        }
        let help = HelpTexts::load(config.help_dir.as_deref())?;
        let pool = WorkerPool::new(config.eval_workers, opts.scratch_dir)?;
        let sink = match &opts.transcript_dir {
            Some(dir) => TranscriptSink::open(dir, keep)?,
            None => TranscriptSink::memory(),
        };
        Ok(Self {
            config,
            world,
            backends,
            pool,
            help,
            sink,
        })
    }

    pub fn config(&self) -> &StationConfig {
        &self.config
    }

    /// Raises or removes the tick limit (for example when resuming).
    pub fn set_max_ticks(&mut self, max: Option<u64>) {
        self.config.max_ticks = max;
        if self.world.phase == Phase::Halted && max.is_none_or(|m| self.world.tick < m) {
            self.world.phase = Phase::Running;
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn help(&self) -> &HelpTexts {
        &self.help
    }

    pub fn transcript_dir(&self) -> Option<&std::path::Path> {
        self.sink.dir()
    }

    pub fn digest(&self) -> String {
        world_digest(&self.world)
    }

    pub fn transcript_head(&self) -> &TranscriptHead {
        &self.world.transcript
    }

    /// Whether the next tick will begin by holding the clock for an
    /// evaluation (the moment to take a pause snapshot).
    pub fn gate_pending(&self) -> bool {
        self.world.gate_pending(self.config.eval_gate_ticks)
    }

    pub fn is_halted(&self) -> bool {
        self.world.phase == Phase::Halted || self.config.max_ticks.is_some_and(|m| self.world.tick >= m)
    }

    fn log<T: Serialize>(&mut self, stream: Stream, record: &T) -> Result<(), StationError> {
        self.sink.append(&mut self.world.transcript, stream, record)?;
        Ok(())
    }

    fn spawn(&mut self, slot: usize, spawned_tick: u64, event_tick: u64) -> Result<LifecycleEvent, StationError> {
        let id = AgentId(self.world.next_agent_id);
        self.world.next_agent_id += 1;
        let backend = self.config.slots[slot].clone();
        let budget = self.config.token_budget(&backend);
        let mut agent = AgentRecord::new(id, slot, backend.clone(), budget, spawned_tick);
        agent.pending_help.push(RoomId::Lobby);
        let welcome = self.help.welcome(&agent.display_name(), budget, &self.config);
        agent.push_message(spawned_tick, MessageKind::Welcome, welcome);
        self.world.agents.insert(id, agent);
        self.world.slots[slot] = id;
        let event = LifecycleEvent {
            agent: id,
            slot,
            kind: LifecycleKind::Spawned,
            tick: event_tick,
        };
        self.log(
            Stream::Ticks,
            &TickRecord::Lifecycle {
                tick: event_tick,
                agent: id,
                slot,
                kind: LifecycleKind::Spawned,
            },
        )?;
        self.log(
            Stream::Agent(id),
            &AgentLog::Spawned {
                tick: spawned_tick,
                slot,
                backend: &backend,
            },
        )?;
        Ok(event)
    }

    fn retire(&mut self, id: AgentId, reason: LifecycleKind, tick: u64) -> Result<LifecycleEvent, StationError> {
        let mut record = self
            .world
            .agents
            .remove(&id)
            .ok_or_else(|| StationError::Invariant(format!("retiring unknown agent {}", id.0)))?;
        self.world.lineages.vacate(id);
        for m in record.inbox.drain(..) {
            self.world.undelivered.push(Undelivered {
                tick: m.tick,
                agent: id,
                kind: m.kind,
                text: m.text,
            });
        }
        record.context = Default::default();
        let slot = record.slot;
        self.world.departed.push(DepartedAgent { record, reason, tick });
        self.log(
            Stream::Ticks,
            &TickRecord::Lifecycle {
                tick,
                agent: id,
                slot,
                kind: reason,
            },
        )?;
        self.log(Stream::Agent(id), &AgentLog::Departed { tick, reason })?;
        Ok(LifecycleEvent {
            agent: id,
            slot,
            kind: reason,
            tick,
        })
    }

    fn dispatch(&self, job_id: u32) {
        let Some(job) = self.world.jobs.get(&job_id) else {
            return;
        };
        let Ok(task) = self.world.board.task(job.task_id) else {
            return;
        };
        let storage = matches!(task.evaluator, EvaluatorBinding::External(_)).then(|| self.world.storage.clone());
        self.pool.dispatch(WorkRequest {
            job_id,
            attempt: job.attempt,
            task_id: job.task_id,
            binding: task.evaluator.clone(),
            content: job.content.clone(),
            time_limit: Duration::from_secs(task.time_limit_secs),
            storage,
        });
    }

    fn start_job(&mut self, id: u32, tick: u64) {
        let Some(sub) = self.world.board.get(id) else {
            return;
        };
        let Ok(task) = self.world.board.task(sub.task_id) else {
            return;
        };
        let mut job = EvaluationJob {
            id,
            task_id: sub.task_id,
            author: sub.author,
            state: JobState::Queued,
            submitted_tick: tick,
            started_tick: tick,
            finished_tick: None,
            attempt: 1,
            no_debugger: sub.no_debugger,
            clock: task.clock,
            due_wall: self.world.wall + task.logical_duration_ticks,
            content: sub.content.clone(),
        };
        job.transition(JobState::Running).expect("queued job starts");
        self.world.jobs.insert(id, job);
        self.dispatch(id);
    }

    /// Delivers every finished evaluation, in job order.
    fn deliver(&mut self, tick: u64, report: &mut TickReport) -> Result<(), StationError> {
        let ids: Vec<u32> = self
            .world
            .jobs
            .values()
            .filter(|j| j.state == JobState::Running)
            .map(|j| j.id)
            .collect();
        for id in ids {
            let job = &self.world.jobs[&id];
            let ready = match job.clock {
                JobClock::Logical => self.world.wall >= job.due_wall,
                JobClock::Wall => self.pool.is_ready(id, job.attempt),
            };
            if !ready {
                continue;
            }
            let attempt = job.attempt;
            let outcome = self.pool.wait_for(id, attempt);
            self.conclude(id, outcome, tick, report)?;
        }
        Ok(())
    }

    fn conclude(
        &mut self,
        id: u32,
        outcome: EvalOutcome,
        tick: u64,
        report: &mut TickReport,
    ) -> Result<(), StationError> {
        let job = self.world.jobs.get_mut(&id).expect("job exists");
        if outcome.verdict == Verdict::Raised && job.attempt == 1 && !job.no_debugger && self.config.debugger.enabled {
            job.transition(JobState::Debugging)
                .expect("running job may be debugged");
            let task = self.world.board.task(job.task_id).expect("task exists");
            let request = DebugRequest {
                code: job.content.clone(),
                error: outcome.error.clone().unwrap_or_else(|| outcome.stderr.clone()),
                signature: task.signature.clone(),
            };
            let duration = task.logical_duration_ticks;
            let debugger = self.backends.debugger(self.config.debugger.backend.as_deref());
            match debugger.repair(&request) {
                Ok(fixed) => {
                    job.transition(JobState::Running).expect("debugged job restarts");
                    job.content = fixed.clone();
                    job.due_wall = self.world.wall + duration;
                    if let Some(sub) = self.world.board.get_mut(id) {
                        sub.fixed_content = Some(fixed);
                    }
                    let wall = self.world.wall;
                    self.log(
                        Stream::Ticks,
                        &TickRecord::Debugger {
                            tick,
                            wall,
                            evaluation: id,
                            repaired: true,
                        },
                    )?;
                    self.dispatch(id);
                    return Ok(());
                }
                Err(e) => {
                    let wall = self.world.wall;
                    self.log(
                        Stream::Ticks,
                        &TickRecord::Debugger {
                            tick,
                            wall,
                            evaluation: id,
                            repaired: false,
                        },
                    )?;
                    let mut outcome = outcome;
                    outcome.error = Some(format!(
                        "{} (the debugger could not repair it: {e})",
                        outcome.error.unwrap_or_default()
                    ));
                    return self.finalize(id, outcome, tick, report);
                }
            }
        }
        self.finalize(id, outcome, tick, report)
    }

    fn finalize(
        &mut self,
        id: u32,
        outcome: EvalOutcome,
        tick: u64,
        report: &mut TickReport,
    ) -> Result<(), StationError> {
        let job = self.world.jobs.get_mut(&id).expect("job exists");
        let (job_state, status) = match outcome.verdict {
            Verdict::Scored => (JobState::Finished, SubmissionStatus::Scored),
            Verdict::Unscored => (JobState::Finished, SubmissionStatus::Unscored),
            _ => (JobState::Invalid, SubmissionStatus::Invalid),
        };
        if job.state == JobState::Debugging {
            job.state = JobState::Running;
        }
        job.transition(job_state).expect("running job finishes");
        job.finished_tick = Some(tick);
        let (attempt, author) = (job.attempt, job.author);
        let sub = self.world.board.get_mut(id).expect("submission exists");
        sub.status = status;
        sub.primary_score = if status == SubmissionStatus::Scored {
            outcome.primary
        } else {
            None
        };
        sub.secondary_metrics = outcome.secondary.clone();
        sub.stdout = outcome.stdout.clone();
        sub.stderr = outcome.stderr.clone();
        sub.final_attempt = attempt;
        sub.finished_tick = Some(tick);
        let (title, task_id, score) = (sub.title.clone(), sub.task_id, sub.primary_score);
        let label = status_label(outcome.verdict);
        let message = render_result_message(id, &title, &outcome, attempt, label);
        self.world.notify(author, tick, MessageKind::EvaluationResult, message);
        if let Some(s) = score {
            self.world.governance.record_score(task_id, s, tick);
        }
        let wall = self.world.wall;
        self.log(
            Stream::Ticks,
            &TickRecord::Delivery {
                tick,
                wall,
                evaluation: id,
                attempt,
                author,
                status: label,
                score,
            },
        )?;
        report.deliveries.push(Delivery {
            evaluation: id,
            author,
            status: label.to_string(),
            score,
        });
        Ok(())
    }

    fn boundary(&mut self, tick: u64, report: &mut TickReport) -> Result<(), StationError> {
        self.deliver(tick, report)?;
        let gate = self.config.eval_gate_ticks;
        loop {
            let active: Vec<(u32, u64, JobClock)> = self
                .world
                .jobs
                .values()
                .filter(|j| j.is_active())
                .map(|j| (j.id, j.age_at(tick), j.clock))
                .collect();
            if !gate_pauses(active.iter().map(|a| a.1), gate) {
                break;
            }
            self.world.phase = Phase::PausedOnEvaluation;
            self.world.wall += 1;
            report.pause_steps += 1;
            let wall = self.world.wall;
            let step = report.pause_steps;
            self.log(
                Stream::Ticks,
                &TickRecord::Pause {
                    tick,
                    wall,
                    step,
                    waiting_on: active.iter().filter(|a| a.1 > gate).map(|a| a.0).collect(),
                },
            )?;
            if active.iter().any(|a| a.2 == JobClock::Wall) {
                self.pool.wait_any(Duration::from_millis(self.config.pause_poll_millis));
            }
            self.deliver(tick, report)?;
        }
        self.world.phase = Phase::Running;

        if self.config.reviewer.enabled {
            self.review_papers(tick, report)?;
        }

        let titles: BTreeMap<u32, String> = self.world.board.tasks.iter().map(|t| (t.id, t.title.clone())).collect();
        let fired = self
            .world
            .governance
            .check_stagnation(tick, self.config.stagnation_threshold_ticks, &titles);
        for a in fired {
            self.world.broadcast(tick, MessageKind::Stagnation, &a.text, None);
            self.log(
                Stream::Ticks,
                &TickRecord::Stagnation {
                    tick,
                    task: a.task_id,
                    ordinal: a.ordinal,
                },
            )?;
            report.stagnation.push(a.task_id);
        }

        let ttl = self.config.common_ttl_ticks;
        self.world.common.retain(|m| m.tick + ttl > tick);
        Ok(())
    }

    fn review_papers(&mut self, tick: u64, report: &mut TickReport) -> Result<(), StationError> {
        let reviewer = self.backends.reviewer(self.config.reviewer.backend.as_deref());
        for id in self.world.capsules.pending_review() {
            let c = self
                .world
                .capsules
                .get(CapsuleRoom::Archive, id)
                .expect("pending capsule")
                .clone();
            let accepted_titles: Vec<String> = self
                .world
                .capsules
                .all(CapsuleRoom::Archive)
                .filter(|x| x.status == CapsuleStatus::Accepted)
                .map(|x| x.title.clone())
                .collect();
            let submission = ReviewSubmission {
                capsule_id: id,
                attempt: c.review_attempt,
                title: c.title.clone(),
                abstract_text: c.abstract_text.clone(),
                content: c
                    .live_messages()
                    .map(|m| m.content.as_str())
                    .collect::<Vec<_>>()
                    .join("\n\n"),
                accepted_titles,
            };
            let result = reviewer.review(
                &self.config.reviewer.guidelines,
                &self.world.governance.review_log,
                &submission,
            );
            match result {
                Ok((outcome, raw)) => {
                    let accepted = outcome.decision == ReviewDecision::Accept;
                    self.world
                        .capsules
                        .apply_verdict(id, accepted, outcome.rationale.clone(), tick);
                    let prompt = submission.render();
                    self.log(
                        Stream::Reviewer,
                        &ReviewerLog::Review {
                            tick,
                            capsule: id,
                            attempt: c.review_attempt,
                            prompt: &prompt,
                            response: &raw,
                            decision: outcome.decision,
                        },
                    )?;
                    self.world.governance.review_log.push(ReviewTurn {
                        tick,
                        capsule_id: id,
                        attempt: c.review_attempt,
                        prompt,
                        response: raw,
                    });
                    let verdict = if accepted {
                        format!(
                            "Your paper #{id} \"{}\" was accepted into the Archive.\nReviewer: {}",
                            c.title, outcome.rationale
                        )
                    } else {
                        format!(
                            "Your paper #{id} \"{}\" was rejected. Revise it with `update {id}` in the Archive Room to resubmit.\nReviewer: {}",
                            c.title, outcome.rationale
                        )
                    };
                    self.world
                        .notify(c.author.agent, tick, MessageKind::ReviewVerdict, verdict);
                    if accepted {
                        let text = format!("New in the Archive: paper #{id} \"{}\" by {}.", c.title, c.author.name);
                        self.world
                            .broadcast(tick, MessageKind::Announcement, &text, Some(c.author.agent));
                    }
                    report.reviews.push((id, outcome.decision));
                }
                Err(e) => {
                    self.log(
                        Stream::Reviewer,
                        &ReviewerLog::Failed {
                            tick,
                            capsule: id,
                            error: e.to_string(),
                        },
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Builds the prompt for `agent` at `tick` without consuming anything.
    pub fn compose_prompt(&self, agent: &AgentRecord, tick: u64) -> PromptBundle {
        let cfg = &self.config;
        let mut info = format!(
            "Current tick: {tick}\nName: {}\nDescription: {}\nAge: {} ticks\nTokens remaining: {} of {}",
            agent.display_name(),
            if agent.description.is_empty() {
                "(none)"
            } else {
                agent.description.as_str()
            },
            agent.age_ticks,
            agent.ledger.remaining(),
            agent.ledger.budget
        );
        if let Some(meta) = &agent.meta_prompt {
            info.push_str(&format!("\nMeta prompt: {meta}"));
        }

        let actions = agent
            .last_actions
            .iter()
            .map(|a| {
                format!(
                    "/execute_action{{{}}}: {}: {}",
                    a.command(),
                    if a.ok { "ok" } else { "failed" },
                    a.message.trim_end()
                )
            })
            .collect();

        let rooms: Vec<RoomId> = if agent.visited.is_empty() {
            vec![agent.location]
        } else {
            agent.visited.clone()
        };
        let mut observations: Vec<RoomObservation> = rooms
            .iter()
            .map(|&room| {
                let mut body = observe(&self.world, agent, room, cfg, tick);
                if agent.pending_help.contains(&room) {
                    body = format!("{}\n\n{body}", self.help.render(room, cfg));
                }
                RoomObservation { room, tick, body }
            })
            .collect();
        for &room in &agent.pending_help {
            if !rooms.contains(&room) {
                observations.push(RoomObservation {
                    room,
                    tick,
                    body: self.help.render(room, cfg),
                });
            }
        }

        let tasks: Vec<String> = agent.read_tasks.iter().map(u32::to_string).collect();
        let status = format!(
            "Location: {} ({})\nStatus: {}\nEntry test: {}\nName: {}\nAge: {} ticks (life limit {}, maturity at {})\nRunning evaluations: {} of {}\nTasks read: {}",
            agent.location.title(),
            agent.location.key(),
            if agent.is_guest() { "Guest" } else { "Recursive" },
            if agent.test_passed { "passed" } else { "not passed" },
            agent.display_name(),
            agent.age_ticks,
            cfg.life_limit_ticks,
            cfg.maturity_age_ticks,
            self.world.board.running_for(agent.id),
            cfg.eval_concurrency_per_agent,
            if tasks.is_empty() { "none".to_string() } else { tasks.join(", ") }
        );

        PromptBundle {
            system_information: info,
            system_messages: agent.inbox.clone(),
            actions_executed: actions,
            room_observations: observations,
            current_status: status,
        }
    }

    fn call(backend: &dyn AgentBackend, req: &TurnRequest<'_>) -> Result<crate::backends::BackendReply, BackendError> {
        backend.respond(req).or_else(|_| backend.respond(req))
    }

    /// Runs one agent's turn. Returns the summary and, if the agent must
    /// leave at the end of the tick, why.
    fn turn(&mut self, slot: usize, tick: u64) -> Result<(TurnSummary, Option<LifecycleKind>), StationError> {
        let id = self.world.slots[slot];
        let mut agent = self
            .world
            .agents
            .remove(&id)
            .ok_or_else(|| StationError::Invariant(format!("slot {slot} holds no live agent")))?;
        let result = self.turn_inner(&mut agent, slot, tick);
        self.world.agents.insert(id, agent);
        result
    }

    fn turn_inner(
        &mut self,
        agent: &mut AgentRecord,
        slot: usize,
        tick: u64,
    ) -> Result<(TurnSummary, Option<LifecycleKind>), StationError> {
        let cfg_maturity = self.config.maturity_age_ticks;
        agent.age_ticks = tick - agent.spawned_tick;
        if cfg_maturity > 0 && agent.age_ticks == cfg_maturity {
            agent.push_message(
                tick,
                MessageKind::Maturity,
                format!(
                    "Congratulations, {}: you have reached maturity. The Archive Room, Public Memory Room, and \
                     Common Room are now open to you, and the Research Counter lists every lineage's submissions.",
                    agent.display_name()
                ),
            );
        }
        let prompt = self.compose_prompt(agent, tick).render();
        let backend = self
            .backends
            .agent(&agent.backend_id)
            .ok_or_else(|| StationError::MissingBackend(agent.backend_id.clone()))?;
        let seed = agent_seed(self.config.rng_seed, agent.id);
        let mut summary = TurnSummary {
            slot,
            agent: agent.id,
            name: agent.display_name(),
            degraded: false,
            actions: Vec::new(),
            tokens_in: 0,
            tokens_out: 0,
            reflections: 0,
        };
        let req = TurnRequest {
            agent: agent.id,
            slot,
            seed,
            kind: TurnKind::Turn,
            prompt: &prompt,
            history: agent.context.entries(),
        };
        let reply = match Self::call(backend.as_ref(), &req) {
            Ok(r) => r,
            Err(e) => {
                summary.degraded = true;
                agent.visited.clear();
                agent.last_actions.clear();
                self.log(
                    Stream::Agent(agent.id),
                    &AgentLog::Degraded {
                        tick,
                        prompt: &prompt,
                        error: e.to_string(),
                    },
                )?;
                self.log_turn(agent, &summary, tick)?;
                return Ok((summary, None));
            }
        };
        agent.inbox.clear();
        agent.pending_help.clear();
        agent.visited.clear();

        let usage = reply.usage.unwrap_or(crate::backends::Usage {
            input: None,
            output: None,
        });
        let tokens_in = usage.input.unwrap_or_else(|| estimate_tokens(&prompt));
        let tokens_out = usage.output.unwrap_or_else(|| estimate_tokens(&reply.text));
        summary.tokens_in += tokens_in;
        summary.tokens_out += tokens_out;
        let exceeded = agent.ledger.charge(tokens_in, tokens_out);
        let mut leaving = None;
        let parse;
        let seq;
        if exceeded {
            parse = ParseOutcome::default();
            seq = agent.context.next_seq();
            agent.last_actions.clear();
            leaving = Some(LifecycleKind::TokenBudgetExceeded);
        } else {
            seq = agent
                .context
                .push(tick, EntryKind::Turn, prompt.clone(), reply.text.clone());
            parse = parse_response_with(
                &reply.text,
                ParseOptions {
                    max_len: self.config.max_response_bytes,
                    max_invocations: MAX_INVOCATIONS,
                },
            );
            let mut records = Vec::new();
            let mut reflections = Vec::new();
            let outbox_before = self.world.outbox.len();
            for inv in &parse.invocations {
                let env = ActionEnv {
                    config: &self.config,
                    help: &self.help,
                    tick,
                    current_seq: seq,
                };
                let (record, effect) = rooms::execute(&mut self.world, agent, inv, &env);
                records.push(record);
                match effect {
                    Effect::Submitted(job) => self.start_job(job, tick),
                    Effect::Reflect { prompt, ticks } => reflections.push((prompt, ticks)),
                    Effect::Depart => leaving = Some(LifecycleKind::DepartedVoluntarily),
                    Effect::None => {}
                }
            }
            for d in &parse.diagnostics {
                records.push(ActionRecord {
                    verb: "(parse)".into(),
                    argument: None,
                    ok: false,
                    message: d.message.clone(),
                });
            }
            let new_outbox: Vec<OutboxRecord> = self.world.outbox[outbox_before..].to_vec();
            for r in &new_outbox {
                self.log(Stream::Outbox, r)?;
            }
            agent.last_actions = records;
            if let Some(kind) = self.reflect(agent, slot, seed, tick, reflections, backend.as_ref(), &mut summary)? {
                leaving = Some(kind);
            }
        }
        summary.actions = agent.last_actions.clone();
        self.log(
            Stream::Agent(agent.id),
            &AgentLog::Turn {
                tick,
                seq,
                prompt: &prompt,
                response: &reply.text,
                parse: &parse,
                results: &agent.last_actions,
                tokens_in,
                tokens_out,
            },
        )?;
        self.log_turn(agent, &summary, tick)?;
        Ok((summary, leaving))
    }

    #[allow(clippy::too_many_arguments)]
    fn reflect(
        &mut self,
        agent: &mut AgentRecord,
        slot: usize,
        seed: u64,
        tick: u64,
        sessions: Vec<(String, u32)>,
        backend: &dyn AgentBackend,
        summary: &mut TurnSummary,
    ) -> Result<Option<LifecycleKind>, StationError> {
        for (opening, n) in sessions {
            for k in 1..=n {
                let prompt = reflection_prompt(k, n, &opening);
                let req = TurnRequest {
                    agent: agent.id,
                    slot,
                    seed,
                    kind: TurnKind::Reflection { k, n },
                    prompt: &prompt,
                    history: agent.context.entries(),
                };
                let Ok(reply) = Self::call(backend, &req) else {
                    return Ok(None);
                };
                let usage = reply.usage.unwrap_or(crate::backends::Usage {
                    input: None,
                    output: None,
                });
                let tokens_in = usage.input.unwrap_or_else(|| estimate_tokens(&prompt));
                let tokens_out = usage.output.unwrap_or_else(|| estimate_tokens(&reply.text));
                summary.tokens_in += tokens_in;
                summary.tokens_out += tokens_out;
                summary.reflections += 1;
                let exceeded = agent.ledger.charge(tokens_in, tokens_out);
                let seq = agent
                    .context
                    .push(tick, EntryKind::Reflection, prompt.clone(), reply.text.clone());
                self.log(
                    Stream::Agent(agent.id),
                    &AgentLog::Reflection {
                        tick,
                        seq,
                        k,
                        n,
                        prompt: &prompt,
                        response: &reply.text,
                        tokens_in,
                        tokens_out,
                    },
                )?;
                if exceeded {
                    return Ok(Some(LifecycleKind::TokenBudgetExceeded));
                }
            }
        }
        Ok(None)
    }

    fn log_turn(&mut self, agent: &AgentRecord, summary: &TurnSummary, tick: u64) -> Result<(), StationError> {
        let wall = self.world.wall;
        self.log(
            Stream::Ticks,
            &TickRecord::Turn {
                tick,
                wall,
                slot: summary.slot,
                agent: agent.id,
                name: &summary.name,
                location: agent.location,
                degraded: summary.degraded,
                tokens_in: summary.tokens_in,
                tokens_out: summary.tokens_out,
                reflections: summary.reflections,
                actions: &summary.actions,
            },
        )
    }

    /// Runs the next tick to completion.
    pub fn advance_tick(&mut self) -> Result<TickReport, StationError> {
        if self.is_halted() {
            self.world.phase = Phase::Halted;
            return Err(StationError::Halted(self.world.tick));
        }
        if self.world.agents.len() != self.config.agent_count {
            return Err(StationError::Invariant(format!(
                "{} live agents at the start of a tick, expected {}",
                self.world.agents.len(),
                self.config.agent_count
            )));
        }
        let tick = self.world.tick + 1;
        let mut report = TickReport {
            tick,
            wall: 0,
            pause_steps: 0,
            deliveries: Vec::new(),
            reviews: Vec::new(),
            stagnation: Vec::new(),
            turns: Vec::new(),
            lifecycle: Vec::new(),
        };
        self.boundary(tick, &mut report)?;

        let mut leaving: Vec<(usize, AgentId, LifecycleKind)> = Vec::new();
        for slot in 0..self.world.slots.len() {
            let (summary, leave) = self.turn(slot, tick)?;
            if let Some(kind) = leave {
                leaving.push((slot, summary.agent, kind));
            }
            report.turns.push(summary);
        }

        let life = self.config.life_limit_ticks;
        for slot in 0..self.world.slots.len() {
            let id = self.world.slots[slot];
            if leaving.iter().any(|l| l.1 == id) {
                continue;
            }
            let a = &self.world.agents[&id];
            if tick + 1 - a.spawned_tick >= life {
                leaving.push((slot, id, LifecycleKind::LifeLimitReached));
            }
        }
        leaving.sort_by_key(|l| l.0);
        for (slot, id, kind) in leaving {
            report.lifecycle.push(self.retire(id, kind, tick)?);
            report.lifecycle.push(self.spawn(slot, tick + 1, tick)?);
        }

        self.world.tick = tick;
        self.world.wall += 1;
        report.wall = self.world.wall;
        let (wall, live) = (self.world.wall, self.world.agents.len());
        self.log(Stream::Ticks, &TickRecord::TickEnd { tick, wall, live })?;
        if self.config.max_ticks.is_some_and(|m| tick >= m) {
            self.world.phase = Phase::Halted;
        }
        Ok(report)
    }

    /// Messages a live agent will see in its next prompt.
    pub fn inbox(&self, agent: AgentId) -> Option<&[SystemMessage]> {
        self.world.agents.get(&agent).map(|a| a.inbox.as_slice())
    }
}
