//! Chat-completions adapter for hosted models.
//!
//! The stored dialogue is replayed as alternating user/assistant messages
//! (at most `max_context_turns` of them, newest kept), followed by the new
//! prompt. Summaries produced by the Token Management Room are sent as a
//! user message so the model sees them in place of the pruned turns.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::scripted::parse_review_response;
use super::{
    AgentBackend, BackendError, BackendReply, Debugger, ReviewOutcome, ReviewSubmission, ReviewTurn, Reviewer,
    TurnRequest, Usage,
};
use crate::agent::{ContextEntry, EntryKind};
use crate::evaluation::DebugRequest;

fn default_timeout() -> u64 {
    120
}
fn default_context_turns() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token (none: no auth header).
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_context_turns")]
    pub max_context_turns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            content: content.into(),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Builds the message list sent for one agent turn.
    pub fn messages(&self, history: &[ContextEntry], prompt: &str) -> Vec<ChatMessage> {
        let keep = history.len().saturating_sub(self.config.max_context_turns);
        let mut msgs = Vec::with_capacity(2 * (history.len() - keep) + 1);
        for e in &history[keep..] {
            match &e.kind {
                EntryKind::Summary { first, last } => msgs.push(ChatMessage::new(
                    "user",
                    format!("(Summary of turns {first}-{last})\n{}", e.response),
                )),
                _ => {
                    msgs.push(ChatMessage::new("user", e.prompt.clone()));
                    msgs.push(ChatMessage::new("assistant", e.response.clone()));
                }
            }
        }
        msgs.push(ChatMessage::new("user", prompt));
        msgs
    }

    pub fn complete(&self, messages: &[ChatMessage]) -> Result<BackendReply, BackendError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages,
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
        };
        let mut rb = self.client.post(&self.config.endpoint).json(&body);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| BackendError::Transport(format!("environment variable {var} is not set")))?;
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            let lower = text.to_ascii_lowercase();
            if status.as_u16() == 400 && (lower.contains("context") || lower.contains("too long")) {
                return Err(BackendError::ContextOverflow);
            }
            return Err(BackendError::Transport(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            )));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Protocol("reply has no choices".into()))?;
        Ok(BackendReply {
            text: choice.message.content,
            usage: parsed.usage.map(|u| Usage {
                input: u.prompt_tokens,
                output: u.completion_tokens,
            }),
        })
    }
}

impl AgentBackend for RemoteBackend {
    fn respond(&self, req: &TurnRequest<'_>) -> Result<BackendReply, BackendError> {
        self.complete(&self.messages(req.history, req.prompt))
    }
}

impl Reviewer for RemoteBackend {
    fn review(
        &self,
        guidelines: &str,
        dialogue: &[ReviewTurn],
        submission: &ReviewSubmission,
    ) -> Result<(ReviewOutcome, String), BackendError> {
        let mut msgs = vec![ChatMessage::new("system", guidelines)];
        let keep = dialogue.len().saturating_sub(self.config.max_context_turns);
        for t in &dialogue[keep..] {
            msgs.push(ChatMessage::new("user", t.prompt.clone()));
            msgs.push(ChatMessage::new("assistant", t.response.clone()));
        }
        msgs.push(ChatMessage::new("user", submission.render()));
        let reply = self.complete(&msgs)?;
        let outcome = parse_review_response(&reply.text)?;
        Ok((outcome, reply.text))
    }
}

const DEBUGGER_INSTRUCTIONS: &str = "You repair code that failed with an error. Reply with the complete \
corrected code only, optionally inside one fenced block. Keep the entry point and its signature unchanged.";

impl Debugger for RemoteBackend {
    fn repair(&self, req: &DebugRequest) -> Result<String, BackendError> {
        let msgs = [
            ChatMessage::new("system", DEBUGGER_INSTRUCTIONS),
            ChatMessage::new(
                "user",
                format!(
                    "Entry point signature: {}\n\nError:\n{}\n\nCode:\n```\n{}\n```",
                    req.signature, req.error, req.code
                ),
            ),
        ];
        Ok(strip_fence(&self.complete(&msgs)?.text))
    }
}

/// Returns the body of the first fenced block, or the text unchanged.
fn strip_fence(text: &str) -> String {
    let mut lines = text.lines();
    if lines.by_ref().any(|l| l.trim_start().starts_with("```")) {
        let body: Vec<&str> = lines.take_while(|l| !l.trim_start().starts_with("```")).collect();
        return format!("{}\n", body.join("\n"));
    }
    text.to_string()
}
