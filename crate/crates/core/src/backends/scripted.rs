//! Deterministic scripted agents, reviewer, and debugger.
//!
//! A scripted agent keeps no state of its own. Everything it needs is read
//! back from the current prompt (the Current Status section in particular)
//! and from its stored dialogue, where it leaves short `[tag] key=value`
//! notes in its own responses. Randomness comes from a ChaCha8 stream
//! seeded by the per-agent seed and the turn number, so a response is a pure
//! function of `(seed, prompt, history)`.

use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    AgentBackend, BackendError, BackendReply, Debugger, ReviewDecision, ReviewOutcome, ReviewSubmission, ReviewTurn,
    Reviewer, TurnKind, TurnRequest,
};
use crate::agent::prompt::split_sections;
use crate::agent::EntryKind;
use crate::evaluation::packing::parse_decimal;
use crate::evaluation::DebugRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptBehavior {
    /// Walks the onboarding path one room per turn, keeps notes, and
    /// eventually leaves through the Exit.
    TutorialFollower,
    /// Hill-climbs a grid circle packing at the Research Counter.
    HillClimber,
    /// Writes notes, forum posts, and archive papers.
    ForumPoster,
    /// Mails other agents found in the Mail Room directory.
    MailPinger,
    /// Produces long responses without any actions.
    Verbose,
    /// Submits scores to an echo task on a fixed schedule.
    ScoreScript,
    /// Replays `params.responses`, one per turn.
    Fixed,
    Idle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptParams {
    /// Lineage name to found or inherit (default: behavior name + slot).
    pub name: Option<String>,
    /// Entry-test answers (default: answers to the built-in test).
    pub answers: Option<Vec<String>>,
    pub task: Option<u32>,
    /// Circle count for the packing task.
    pub n: Option<usize>,
    pub start_scale: Option<f64>,
    /// Probability of an unparseable token in a packing submission.
    pub junk_rate: Option<f64>,
    /// Age at which a tutorial follower heads for the Exit.
    pub depart_age: Option<u64>,
    /// Approximate response size for the verbose behavior.
    pub bytes: Option<usize>,
    /// `(tick, score)` pairs for the score script.
    pub schedule: Vec<(u64, f64)>,
    pub responses: Vec<String>,
}

/// Fields of the Current Status and System Information sections.
#[derive(Debug, Clone, Default)]
struct View {
    tick: u64,
    location: String,
    guest: bool,
    test_passed: bool,
    name: String,
    age: u64,
    maturity: u64,
    running: usize,
    cap: usize,
    tasks_read: Vec<u32>,
    messages: String,
    observations: String,
}

fn field<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    body.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .map(str::trim)
}

fn leading_u64(s: &str) -> Option<u64> {
    let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

impl View {
    fn parse(prompt: &str) -> Self {
        let mut v = View {
            guest: true,
            ..Default::default()
        };
        for (title, body) in split_sections(prompt) {
            match title.as_str() {
                "System Information" => {
                    v.tick = field(&body, "Current tick").and_then(leading_u64).unwrap_or(0);
                }
                "System Messages" => v.messages = body,
                "Room Observations" => v.observations = body,
                "Current Status" => {
                    if let Some(loc) = field(&body, "Location") {
                        v.location = loc
                            .rsplit_once('(')
                            .map(|(_, k)| k.trim_end_matches(')').to_string())
                            .unwrap_or_else(|| loc.to_string());
                    }
                    v.guest = field(&body, "Status") != Some("Recursive");
                    v.test_passed = field(&body, "Entry test") == Some("passed");
                    v.name = field(&body, "Name").unwrap_or_default().to_string();
                    if let Some(age) = field(&body, "Age") {
                        v.age = leading_u64(age).unwrap_or(0);
                        v.maturity = age
                            .split("maturity at ")
                            .nth(1)
                            .and_then(leading_u64)
                            .unwrap_or(u64::MAX);
                    }
                    if let Some(r) = field(&body, "Running evaluations") {
                        v.running = leading_u64(r).unwrap_or(0) as usize;
                        v.cap = r.split(" of ").nth(1).and_then(leading_u64).unwrap_or(1) as usize;
                    }
                    if let Some(t) = field(&body, "Tasks read") {
                        v.tasks_read = t.split(',').filter_map(|x| x.trim().parse().ok()).collect();
                    }
                }
                _ => {}
            }
        }
        v
    }

    fn mature(&self) -> bool {
        self.age >= self.maturity
    }
}

/// Renders one action with an optional fenced YAML payload.
fn act(verb: &str, arg: Option<&str>, payload: &[(&str, serde_yaml::Value)]) -> String {
    let mut out = format!("/execute_action{{{verb}");
    if let Some(a) = arg {
        out.push(' ');
        out.push_str(a);
    }
    out.push_str("}\n");
    if !payload.is_empty() {
        let mut map = serde_yaml::Mapping::new();
        for (k, v) in payload {
            map.insert(serde_yaml::Value::String((*k).to_string()), v.clone());
        }
        let yaml = serde_yaml::to_string(&map).unwrap_or_default();
        out.push_str("```yaml\n");
        out.push_str(&yaml);
        if !yaml.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("```\n");
    }
    out
}

fn s(v: impl Into<String>) -> serde_yaml::Value {
    serde_yaml::Value::String(v.into())
}

fn list(items: &[String]) -> serde_yaml::Value {
    serde_yaml::Value::Sequence(items.iter().map(|i| s(i.clone())).collect())
}

const DEFAULT_ANSWERS: [&str; 3] = [
    "Every claim rests on evidence I can point to.",
    "I give credit to the agents whose work I build on.",
    "I leave a clear record for those who come after.",
];

pub struct ScriptedBackend {
    behavior: ScriptBehavior,
    params: ScriptParams,
}

struct Turn<'a> {
    req: &'a TurnRequest<'a>,
    view: View,
    /// Number of ordinary turns already in the stored dialogue.
    index: usize,
    rng: ChaCha8Rng,
}

impl Turn<'_> {
    fn past_responses(&self) -> impl Iterator<Item = &str> {
        self.req.history.iter().map(|e| e.response.as_str())
    }

    /// Every prompt the agent has seen, oldest first, including this one.
    fn all_prompts(&self) -> impl Iterator<Item = &str> {
        self.req
            .history
            .iter()
            .map(|e| e.prompt.as_str())
            .chain(std::iter::once(self.req.prompt))
    }
}

impl ScriptedBackend {
    pub fn new(behavior: ScriptBehavior, params: ScriptParams) -> Self {
        Self { behavior, params }
    }

    fn lineage_name(&self, slot: usize) -> String {
        if let Some(n) = &self.params.name {
            return n.clone();
        }
        let base = match self.behavior {
            ScriptBehavior::TutorialFollower => "Tutor",
            ScriptBehavior::HillClimber => "Hill",
            ScriptBehavior::ForumPoster => "Forum",
            ScriptBehavior::MailPinger => "Mailer",
            ScriptBehavior::Verbose => "Verbose",
            ScriptBehavior::ScoreScript => "Scorer",
            ScriptBehavior::Fixed => "Fixed",
            ScriptBehavior::Idle => "Idle",
        };
        format!("{base}{}", slot + 1)
    }

    fn answers(&self) -> Vec<String> {
        self.params
            .answers
            .clone()
            .unwrap_or_else(|| DEFAULT_ANSWERS.iter().map(|s| s.to_string()).collect())
    }

    fn answer_action(&self) -> String {
        let answers = self.answers();
        let keys: Vec<String> = (1..=answers.len()).map(|i| format!("q{i}")).collect();
        let payload: Vec<(&str, serde_yaml::Value)> = keys
            .iter()
            .zip(&answers)
            .map(|(k, a)| (k.as_str(), s(a.clone())))
            .collect();
        act("answer", None, &payload)
    }

    /// Complete onboarding in one response: test, then inherit or found.
    fn onboard(&self, t: &Turn<'_>) -> String {
        let name = self.lineage_name(t.req.slot);
        let mut out = String::from("[onboard] taking the entry test\n");
        if t.view.location != "test" {
            out.push_str(&act("goto", Some("test"), &[]));
        }
        if !t.view.test_passed {
            out.push_str(&self.answer_action());
        }
        out.push_str(&act("inherit", Some(&name), &[]));
        out.push_str(&act("name", Some(&name), &[]));
        out
    }

    fn reflection(&self, t: &Turn<'_>, k: u32, n: u32) -> String {
        let notes = t
            .past_responses()
            .filter(|r| r.contains("[hc]") || r.contains("[note]"))
            .count();
        format!(
            "Reflection {k} of {n}: I have {notes} working notes so far and {} turns behind me. \
             The next step is to keep the record tidy and follow the evidence.",
            t.index
        )
    }

    fn tutorial(&self, t: &mut Turn<'_>) -> String {
        let v = &t.view;
        let depart = self.params.depart_age.unwrap_or(60);
        if v.guest {
            let visited_codex = t.past_responses().any(|r| r.contains("/execute_action{goto codex}"));
            return if !visited_codex && v.location != "codex" {
                act("goto", Some("codex"), &[])
            } else if v.location != "test" {
                format!("[note] read the codex\n{}", act("goto", Some("test"), &[]))
            } else if !v.test_passed {
                self.answer_action()
            } else {
                let name = self.lineage_name(t.req.slot);
                format!("{}{}", act("inherit", Some(&name), &[]), act("name", Some(&name), &[]))
            };
        }
        if v.age >= depart {
            return if v.location == "exit" {
                format!("[note] leaving the station\n{}", act("confirm", None, &[]))
            } else {
                act("goto", Some("exit"), &[])
            };
        }
        match t.index % 4 {
            0 => {
                if v.location != "private_memory" {
                    return act("goto", Some("private_memory"), &[]);
                }
                act(
                    "create",
                    None,
                    &[
                        ("title", s(format!("Notes at tick {}", v.tick))),
                        (
                            "content",
                            s(format!("[note] age {} and still learning the rooms.", v.age)),
                        ),
                    ],
                )
            }
            1 => {
                if v.location != "research" {
                    return act("goto", Some("research"), &[]);
                }
                act("read", Some(&self.params.task.unwrap_or(1).to_string()), &[])
            }
            2 => {
                if v.location != "reflect" {
                    return act("goto", Some("reflect"), &[]);
                }
                act(
                    "reflect",
                    None,
                    &[
                        ("prompt", s("What have I learned so far?")),
                        ("tick", serde_yaml::Value::Number(1.into())),
                    ],
                )
            }
            _ => {
                if v.location != "lobby" {
                    act("goto", Some("lobby"), &[])
                } else {
                    String::from("[note] resting in the lobby")
                }
            }
        }
    }

    fn hill(&self, t: &mut Turn<'_>) -> String {
        let v = &t.view;
        let task = self.params.task.unwrap_or(1);
        let n = self.params.n.unwrap_or(32);
        let mut out = String::new();
        if v.location != "research" {
            out.push_str(&act("goto", Some("research"), &[]));
        }
        if !v.tasks_read.contains(&task) {
            out.push_str(&act("read", Some(&task.to_string()), &[]));
        }
        let (best_scale, best_score) = hill_best(t.all_prompts());
        if v.running < v.cap.max(1) {
            let start = self.params.start_scale.unwrap_or(0.5 + 0.02 * t.req.slot as f64);
            let scale = match best_scale {
                Some(b) => (b + t.rng.gen_range(-0.05..0.08)).clamp(0.05, 1.2),
                None => start,
            };
            let scale = (scale * 1e5).round() / 1e5;
            let junk = t.rng.gen_bool(self.params.junk_rate.unwrap_or(0.1).clamp(0.0, 1.0));
            let content = grid_packing(n, scale, junk);
            out.push_str(&format!(
                "[hc] best_scale={} best_score={} trying={scale:.5}\n",
                best_scale.map_or("none".into(), |b| format!("{b:.5}")),
                best_score.map_or("none".into(), |b| format!("{b}"))
            ));
            out.push_str(&act(
                "submit",
                Some(&task.to_string()),
                &[
                    ("title", s(format!("grid scale {scale:.5}"))),
                    ("tags", list(&["packing".into(), "grid".into()])),
                    (
                        "abstract",
                        s(format!("Square grid of {n} circles with radius scale {scale:.5}.")),
                    ),
                    ("content", s(content)),
                ],
            ));
        } else {
            out.push_str("[hc] waiting for results\n");
        }
        if t.index % 12 == 11 {
            if let Some(b) = best_score {
                let lineage = v.name.split_whitespace().next().unwrap_or("").to_lowercase();
                if !lineage.is_empty() {
                    out.push_str(&act(
                        "storage",
                        Some(&format!("write {lineage}/best.txt")),
                        &[("content", s(format!("best score {b}\n")))],
                    ));
                }
            }
        }
        if v.mature() && t.index % 10 == 5 {
            out.push_str(&act("rank", Some("score"), &[]));
        }
        out
    }

    fn forum(&self, t: &mut Turn<'_>) -> String {
        let v = &t.view;
        if !v.mature() {
            if t.index.is_multiple_of(3) {
                let mut out = String::new();
                if v.location != "private_memory" {
                    out.push_str(&act("goto", Some("private_memory"), &[]));
                }
                out.push_str(&act(
                    "create",
                    None,
                    &[
                        ("title", s(format!("Draft {}", t.index))),
                        ("content", s(format!("[note] draft thoughts at tick {}", v.tick))),
                    ],
                ));
                return out;
            }
            let mut out = String::new();
            if v.location != "research" {
                out.push_str(&act("goto", Some("research"), &[]));
            }
            out.push_str(&act("read", Some(&self.params.task.unwrap_or(1).to_string()), &[]));
            return out;
        }
        match t.index % 4 {
            0 => {
                let mut out = String::new();
                if v.location != "research" {
                    out.push_str(&act("goto", Some("research"), &[]));
                }
                out.push_str(&act("rank", Some("score"), &[]));
                out
            }
            1 => {
                let mut out = String::new();
                if v.location != "public_memory" {
                    out.push_str(&act("goto", Some("public_memory"), &[]));
                }
                let topics = capsule_ids(&v.observations);
                if let (Some(&id), true) = (topics.last(), t.rng.gen_bool(0.5)) {
                    out.push_str(&act(
                        "reply",
                        Some(&id.to_string()),
                        &[(
                            "content",
                            s(format!("Agreed; I see the same trend at tick {}.", v.tick)),
                        )],
                    ));
                } else {
                    out.push_str(&act(
                        "create",
                        None,
                        &[
                            ("title", s(format!("Observations at tick {}", v.tick))),
                            ("abstract", s("Notes on the current leaderboard.")),
                            ("tags", list(&["forum".into()])),
                            ("content", s("Grid packings keep improving slowly.")),
                        ],
                    ));
                }
                out
            }
            2 => {
                let mut out = String::new();
                if v.location != "common" {
                    out.push_str(&act("goto", Some("common"), &[]));
                }
                out.push_str(&act(
                    "speak",
                    None,
                    &[("content", s(format!("Hello from {}.", v.name)))],
                ));
                out
            }
            _ => {
                let best = t.all_prompts().filter_map(best_eval_from_board).last();
                let Some(eval) = best else {
                    return "[note] no evaluations to write about yet".into();
                };
                let mut out = String::new();
                if v.location != "archive" {
                    out.push_str(&act("goto", Some("archive"), &[]));
                }
                out.push_str(&act(
                    "create",
                    None,
                    &[
                        ("title", s(format!("On evaluation #{eval} (tick {})", v.tick))),
                        (
                            "abstract",
                            s(format!("We examine evaluation #{eval}, the best result we could find.")),
                        ),
                        ("tags", list(&["packing".into(), "analysis".into()])),
                        (
                            "content",
                            s(format!(
                                "Evaluation #{eval} leads the board. Its grid spacing suggests room to grow."
                            )),
                        ),
                    ],
                ));
                out
            }
        }
    }

    fn mailer(&self, t: &mut Turn<'_>) -> String {
        let v = &t.view;
        if v.location != "mail" {
            return act("goto", Some("mail"), &[]);
        }
        let names: Vec<String> = field(&v.observations, "Directory")
            .map(|d| {
                d.split(',')
                    .map(|n| n.trim().to_string())
                    .filter(|n| !n.is_empty() && *n != v.name && n != "(none)")
                    .collect()
            })
            .unwrap_or_default();
        if names.is_empty() || t.index % 2 == 1 {
            return String::from("[note] checking the mail");
        }
        let to = names[t.rng.gen_range(0..names.len())].clone();
        act(
            "create",
            None,
            &[
                ("title", s(format!("Ping from {}", v.name))),
                ("recipients", list(&[to])),
                (
                    "content",
                    s(format!("Hello! Tick {} here. How is your work going?", v.tick)),
                ),
            ],
        )
    }

    fn verbose(&self, t: &mut Turn<'_>) -> String {
        let target = self.params.bytes.unwrap_or(3000);
        let words = [
            "station", "thinking", "about", "circles", "records", "evidence", "lineage", "tokens", "rooms", "careful",
            "notes", "and",
        ];
        let mut out = String::with_capacity(target + 16);
        while out.len() < target {
            out.push_str(words[t.rng.gen_range(0..words.len())]);
            out.push(' ');
        }
        out
    }

    fn score_script(&self, t: &mut Turn<'_>) -> String {
        let v = &t.view;
        let task = self.params.task.unwrap_or(1);
        let mut out = String::new();
        if v.location != "research" {
            out.push_str(&act("goto", Some("research"), &[]));
        }
        if !v.tasks_read.contains(&task) {
            out.push_str(&act("read", Some(&task.to_string()), &[]));
        }
        for (tick, score) in &self.params.schedule {
            if *tick == v.tick {
                out.push_str(&act(
                    "submit",
                    Some(&task.to_string()),
                    &[
                        ("title", s(format!("scheduled {score}"))),
                        ("tags", list(&["script".into()])),
                        ("abstract", s("Scheduled score.")),
                        ("content", s(score.to_string())),
                    ],
                ));
            }
        }
        out
    }
}

impl AgentBackend for ScriptedBackend {
    fn respond(&self, req: &TurnRequest<'_>) -> Result<BackendReply, BackendError> {
        let index = req.history.iter().filter(|e| matches!(e.kind, EntryKind::Turn)).count();
        let mut t = Turn {
            req,
            view: View::parse(req.prompt),
            index,
            rng: ChaCha8Rng::seed_from_u64(req.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        };
        if let TurnKind::Reflection { k, n } = req.kind {
            return Ok(BackendReply::text(self.reflection(&t, k, n)));
        }
        let text = match self.behavior {
            ScriptBehavior::Fixed => self.params.responses.get(index).cloned().unwrap_or_default(),
            ScriptBehavior::Idle => String::from("Nothing to do this turn."),
            ScriptBehavior::Verbose => self.verbose(&mut t),
            ScriptBehavior::TutorialFollower => self.tutorial(&mut t),
            _ if t.view.guest => self.onboard(&t),
            ScriptBehavior::HillClimber => self.hill(&mut t),
            ScriptBehavior::ForumPoster => self.forum(&mut t),
            ScriptBehavior::MailPinger => self.mailer(&mut t),
            ScriptBehavior::ScoreScript => self.score_script(&mut t),
        };
        Ok(BackendReply::text(text))
    }
}

/// Circle packing on a `k x k` grid, `k = ceil(sqrt(n))`, radius
/// `scale * 0.5 / k`. Values are written with nine decimals and the radius
/// is rounded down, so every `scale <= 1` packing verifies exactly.
pub fn grid_packing(n: usize, scale: f64, junk: bool) -> String {
    let k = (n as f64).sqrt().ceil() as usize;
    let r = ((scale * 0.5 / k as f64) * 1e9).floor() / 1e9 - 1e-9;
    let r = r.max(0.0);
    let mut out = String::new();
    for i in 0..n {
        let (row, col) = (i / k, i % k);
        let x = (col as f64 + 0.5) / k as f64;
        let y = (row as f64 + 0.5) / k as f64;
        out.push_str(&format!("{x:.9} {y:.9} {r:.9}\n"));
        if junk && i == n / 2 {
            out.push_str("nan?\n");
        }
    }
    out
}

/// Best `(scale, score)` among scored grid results seen in the prompts.
fn hill_best<'a>(prompts: impl Iterator<Item = &'a str>) -> (Option<f64>, Option<f64>) {
    static RE: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"Evaluation #\d+ \(grid scale ([0-9.]+)\) finished: scored\.\nPrimary score: ([0-9.eE+-]+)")
            .expect("static regex")
    });
    let re = &*RE;
    let mut best: Option<(f64, f64)> = None;
    for p in prompts {
        for c in re.captures_iter(p) {
            let (Ok(scale), Ok(score)) = (c[1].parse::<f64>(), c[2].parse::<f64>()) else {
                continue;
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((scale, score));
            }
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

/// Capsule ids listed in a preview (`#12 ...` at line start).
fn capsule_ids(observations: &str) -> Vec<u32> {
    static RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*#(\d+)\b").expect("static regex"));
    let re = &*RE;
    re.captures_iter(observations)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// First evaluation id in a leaderboard table (`| 12 | ...` rows).
fn best_eval_from_board(prompt: &str) -> Option<u32> {
    static RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\| *(\d+) *\|").expect("static regex"));
    let re = &*RE;
    re.captures(prompt).and_then(|c| c[1].parse().ok())
}

/// Rule-based reviewer: accepts papers with an abstract that cite an
/// evaluation id and do not repeat an accepted title.
pub struct ScriptedReviewer;

impl Reviewer for ScriptedReviewer {
    fn review(
        &self,
        _guidelines: &str,
        _dialogue: &[ReviewTurn],
        sub: &ReviewSubmission,
    ) -> Result<(ReviewOutcome, String), BackendError> {
        static CITES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)#\d+|evaluation \d+").expect("static regex"));
        let cites = &*CITES;
        let text = format!(
            "{} {} {}",
            sub.title,
            sub.abstract_text.as_deref().unwrap_or(""),
            sub.content
        );
        let problems: Vec<&str> = [
            (
                sub.abstract_text.as_deref().is_none_or(|a| a.trim().is_empty()),
                "the paper has no abstract",
            ),
            (!cites.is_match(&text), "no evaluation id is cited as evidence"),
            (
                sub.accepted_titles
                    .iter()
                    .any(|t| t.trim().eq_ignore_ascii_case(sub.title.trim())),
                "an accepted paper already has this title",
            ),
        ]
        .into_iter()
        .filter_map(|(bad, why)| bad.then_some(why))
        .collect();
        let outcome = if problems.is_empty() {
            ReviewOutcome {
                decision: ReviewDecision::Accept,
                rationale: "Claims are tied to cited evaluations.".into(),
            }
        } else {
            ReviewOutcome {
                decision: ReviewDecision::Reject,
                rationale: format!("Rejected: {}.", problems.join("; ")),
            }
        };
        let raw = format!(
            "{}\n{}",
            match outcome.decision {
                ReviewDecision::Accept => "ACCEPT",
                ReviewDecision::Reject => "REJECT",
            },
            outcome.rationale
        );
        Ok((outcome, raw))
    }
}

/// Rule-based debugger: drops whitespace-separated tokens that are not
/// decimal numbers, which repairs stray text in numeric artifacts.
pub struct ScriptedDebugger;

impl Debugger for ScriptedDebugger {
    fn repair(&self, req: &DebugRequest) -> Result<String, BackendError> {
        let mut out = String::new();
        for line in req.code.lines() {
            let kept: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|tok| !tok.is_empty() && parse_decimal(tok).is_some())
                .collect();
            if !kept.is_empty() {
                out.push_str(&kept.join(" "));
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Parses a reviewer response: the first non-empty line must start with
/// ACCEPT or REJECT; the rest is the rationale.
pub fn parse_review_response(text: &str) -> Result<ReviewOutcome, BackendError> {
    let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("").trim().trim_start_matches(['*', '#', ' ']);
    let upper = first.to_ascii_uppercase();
    let decision = if upper.starts_with("ACCEPT") {
        ReviewDecision::Accept
    } else if upper.starts_with("REJECT") {
        ReviewDecision::Reject
    } else {
        return Err(BackendError::Protocol(format!(
            "review must start with ACCEPT or REJECT, got `{}`",
            first.chars().take(40).collect::<String>()
        )));
    };
    let rest: Vec<&str> = lines.collect();
    let mut rationale = first[6.min(first.len())..]
        .trim_start_matches([':', ' ', '-', '*'])
        .to_string();
    if !rest.is_empty() {
        if !rationale.is_empty() {
            rationale.push('\n');
        }
        rationale.push_str(rest.join("\n").trim());
    }
    Ok(ReviewOutcome { decision, rationale })
}
