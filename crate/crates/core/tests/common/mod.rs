//! Helpers shared by the integration tests: manifests, a prompt-recording
//! backend wrapper, and transcript readers.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use station::agent::AgentId;
use station::backends::{AgentBackend, BackendError, BackendRegistry, BackendReply, TurnKind, TurnRequest};
use station::config::StationConfig;
use station::kernel::{Station, StationOptions};

/// Five scripted agents hill-climbing a 26-circle packing, posting, and mailing.
pub const SCRIPTED: &str = r#"
agent_count = 5
rng_seed = 42
max_ticks = 200
slots = ["tutorial", "hill", "hill", "forum", "mail"]

[backends.tutorial]
kind = "scripted"
behavior = "tutorial_follower"

[backends.hill]
kind = "scripted"
behavior = "hill_climber"
params = { task = 1, n = 26 }

[backends.forum]
kind = "scripted"
behavior = "forum_poster"

[backends.mail]
kind = "scripted"
behavior = "mail_pinger"

[[task_specs]]
id = 1
title = "Circle packing"
description = "Pack 26 circles in the unit square."
evaluator = { kind = "circle_packing", n = 26 }
logical_duration_ticks = 2
"#;

pub fn config(toml: &str) -> StationConfig {
    StationConfig::from_toml_str(toml).expect("test manifest is valid")
}

/// One prompt seen by a backend.
#[derive(Debug, Clone)]
pub struct Seen {
    pub agent: AgentId,
    pub tick: u64,
    pub reflection: bool,
    pub prompt: String,
}

pub type Log = Arc<Mutex<Vec<Seen>>>;

/// Records every prompt and lets a test replace the response on given ticks.
pub struct Recorder {
    inner: Arc<dyn AgentBackend>,
    log: Log,
    overrides: BTreeMap<u64, String>,
}

impl Recorder {
    pub fn new(inner: Arc<dyn AgentBackend>, log: Log) -> Self {
        Self {
            inner,
            log,
            overrides: BTreeMap::new(),
        }
    }

    pub fn on_tick(mut self, tick: u64, response: impl Into<String>) -> Self {
        self.overrides.insert(tick, response.into());
        self
    }
}

pub fn prompt_tick(prompt: &str) -> u64 {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Current tick: "))
        .and_then(|t| t.trim().parse().ok())
        .unwrap_or(0)
}

impl AgentBackend for Recorder {
    fn respond(&self, req: &TurnRequest<'_>) -> Result<BackendReply, BackendError> {
        let reflection = matches!(req.kind, TurnKind::Reflection { .. });
        let tick = prompt_tick(req.prompt);
        self.log.lock().unwrap().push(Seen {
            agent: req.agent,
            tick,
            reflection,
            prompt: req.prompt.to_string(),
        });
        match self.overrides.get(&tick) {
            Some(text) if !reflection => Ok(BackendReply::text(text.clone())),
            _ => self.inner.respond(req),
        }
    }
}

/// Builds a station whose backends may be wrapped per backend id.
pub fn station(
    cfg: &StationConfig,
    transcript: Option<&Path>,
    wrap: impl Fn(&str, Arc<dyn AgentBackend>) -> Arc<dyn AgentBackend>,
) -> Station {
    let base = BackendRegistry::from_bindings(&cfg.backends).expect("scripted backends build");
    let mut registry = base.clone();
    for id in cfg.backends.keys() {
        registry.insert(id.clone(), wrap(id, base.agent(id).expect("backend exists")));
    }
    Station::new(
        cfg.clone(),
        StationOptions {
            transcript_dir: transcript.map(Path::to_path_buf),
            backends: Some(registry),
            ..Default::default()
        },
    )
    .expect("station starts")
}

pub fn plain(cfg: &StationConfig, transcript: Option<&Path>) -> Station {
    Station::new(
        cfg.clone(),
        StationOptions {
            transcript_dir: transcript.map(Path::to_path_buf),
            ..Default::default()
        },
    )
    .expect("station starts")
}

/// Records of one transcript stream, in order.
pub fn records(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .expect("transcript stream exists")
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).expect("transcript line is JSON")["record"].clone())
        .collect()
}
