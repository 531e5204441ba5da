//! Extraction of `/execute_action{...}` commands from free-form agent text.
//!
//! Grammar, one command per line:
//!
//! ```text
//! /execute_action{<verb>[ <argument>]}
//! ```
//!
//! The line is matched after trimming surrounding whitespace (and one pair of
//! surrounding backticks). Braces do not nest and must close on the same line.
//! A payload block may start on the next non-empty line, either fenced with
//! three or more backticks or as a run of `key: value` lines that ends at a
//! blank line (unless the next text is indented) or at the next command.
//! Everything else in the response is ignored.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::payload::{self, Payload};

pub const COMMAND_PREFIX: &str = "/execute_action{";

/// One parsed command.
///
/// `source_span` is a byte range into the (possibly truncated) response text
/// covering the command line and its payload block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionInvocation {
    pub verb: String,
    pub argument: Option<String>,
    pub payload: Option<Payload>,
    pub source_span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: Range<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub invocations: Vec<ActionInvocation>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_len: usize,
    pub max_invocations: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_len: 1 << 20,
            max_invocations: 32,
        }
    }
}

struct Line<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn split_lines(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for piece in text.split_inclusive('\n') {
        let end = start + piece.len();
        let body = piece.trim_end_matches('\n').trim_end_matches('\r');
        lines.push(Line { text: body, start, end });
        start = end;
    }
    lines
}

/// Matches a command line, returning `(verb, argument)` with the verb
/// lowercased. An empty verb yields `Some(("", None))`.
pub fn match_command(line: &str) -> Option<(String, Option<String>)> {
    let mut t = line.trim();
    if t.len() >= 2 && t.starts_with('`') && t.ends_with('`') && !t.starts_with("```") {
        t = t[1..t.len() - 1].trim();
    }
    let inner = t.strip_prefix(COMMAND_PREFIX)?.strip_suffix('}')?;
    if inner.contains(['{', '}']) {
        return None;
    }
    let inner = inner.trim();
    let (verb, arg) = match inner.find(char::is_whitespace) {
        Some(i) => (&inner[..i], Some(inner[i..].trim())),
        None => (inner, None),
    };
    Some((verb.to_lowercase(), arg.filter(|a| !a.is_empty()).map(str::to_string)))
}

fn fence_len(line: &str) -> Option<usize> {
    let t = line.trim_start();
    let n = t.chars().take_while(|&c| c == '`').count();
    (n >= 3).then_some(n)
}

fn is_fence_close(line: &str, open: usize) -> bool {
    let t = line.trim();
    t.len() >= open && t.chars().all(|c| c == '`')
}

fn looks_like_key_value(line: &str) -> bool {
    let t = line.trim_start();
    let mut chars = t.char_indices();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    for (i, c) in chars {
        if c == ':' {
            let rest = &t[i + 1..];
            return rest.is_empty() || rest.starts_with([' ', '\t']);
        }
        if !(c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return false;
        }
    }
    false
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

enum Block {
    None,
    Parsed { payload: Payload, end_line: usize },
    Malformed { message: String, end_line: usize },
}

fn scan_block(lines: &[Line<'_>], cmd: usize) -> Block {
    let mut j = cmd + 1;
    while j < lines.len() && is_blank(lines[j].text) {
        j += 1;
    }
    if j >= lines.len() || match_command(lines[j].text).is_some() {
        return Block::None;
    }
    if let Some(open) = fence_len(lines[j].text) {
        let close = (j + 1..lines.len()).find(|&k| is_fence_close(lines[k].text, open));
        let Some(close) = close else {
            return Block::Malformed {
                message: "unterminated fenced block".into(),
                end_line: j,
            };
        };
        let body: Vec<&str> = lines[j + 1..close].iter().map(|l| l.text).collect();
        return match payload::parse_block(&(body.join("\n") + "\n")) {
            Ok(payload) => Block::Parsed {
                payload,
                end_line: close,
            },
            Err(message) => Block::Malformed {
                message,
                end_line: close,
            },
        };
    }
    if !looks_like_key_value(lines[j].text) {
        return Block::None;
    }
    let mut end = j;
    let mut k = j + 1;
    while k < lines.len() {
        let text = lines[k].text;
        if match_command(text).is_some() {
            break;
        }
        if is_blank(text) {
            let next = (k + 1..lines.len()).find(|&m| !is_blank(lines[m].text));
            match next {
                Some(m) if lines[m].text.starts_with([' ', '\t']) && match_command(lines[m].text).is_none() => {
                    k = m;
                    continue;
                }
                _ => break,
            }
        }
        end = k;
        k += 1;
    }
    let body: Vec<&str> = lines[j..=end].iter().map(|l| l.text).collect();
    match payload::parse_block(&(body.join("\n") + "\n")) {
        Ok(payload) => Block::Parsed { payload, end_line: end },
        Err(message) => Block::Malformed { message, end_line: end },
    }
}

fn truncate_to(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut cut = max;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    &text[..cut]
}

pub fn parse_response(text: &str) -> ParseOutcome {
    parse_response_with(text, ParseOptions::default())
}

pub fn parse_response_with(text: &str, opts: ParseOptions) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let text = if text.len() > opts.max_len {
        let cut = truncate_to(text, opts.max_len);
        out.diagnostics.push(Diagnostic {
            span: cut.len()..text.len(),
            message: format!("response truncated to {} bytes", cut.len()),
        });
        cut
    } else {
        text
    };
    let lines = split_lines(text);
    let mut overflow_reported = false;
    let mut i = 0;
    while i < lines.len() {
        let Some((verb, argument)) = match_command(lines[i].text) else {
            i += 1;
            continue;
        };
        let line_span = lines[i].start..lines[i].end;
        if verb.is_empty() {
            out.diagnostics.push(Diagnostic {
                span: line_span,
                message: "empty action name".into(),
            });
            i += 1;
            continue;
        }
        let (payload, end_line) = match scan_block(&lines, i) {
            Block::None => (None, i),
            Block::Parsed { payload, end_line } => (Some(payload), end_line),
            Block::Malformed { message, end_line } => {
                out.diagnostics.push(Diagnostic {
                    span: lines[i].start..lines[end_line].end,
                    message: format!("malformed payload for `{verb}`: {message}"),
                });
                (None, end_line)
            }
        };
        let span = lines[i].start..lines[end_line].end;
        if out.invocations.len() < opts.max_invocations {
            out.invocations.push(ActionInvocation {
                verb,
                argument,
                payload,
                source_span: span,
            });
        } else if !overflow_reported {
            overflow_reported = true;
            out.diagnostics.push(Diagnostic {
                span,
                message: format!(
                    "more than {} actions in one response; the rest are ignored",
                    opts.max_invocations
                ),
            });
        }
        i = end_line + 1;
    }
    out
}

/// Canonical text form of a list of invocations; parses back to the same
/// verbs, arguments, and payloads.
pub fn render(invocations: &[ActionInvocation]) -> String {
    let mut out = String::new();
    for inv in invocations {
        out.push_str(COMMAND_PREFIX);
        out.push_str(&inv.verb);
        if let Some(arg) = &inv.argument {
            out.push(' ');
            out.push_str(arg);
        }
        out.push_str("}\n");
        if let Some(p) = &inv.payload {
            let body = payload::render_block(p);
            let longest = body
                .lines()
                .map(|l| l.trim_start().chars().take_while(|&c| c == '`').count())
                .max()
                .unwrap_or(0);
            let fence = "`".repeat(longest.max(2) + 1);
            out.push_str(&fence);
            out.push_str("yaml\n");
            out.push_str(&body);
            if !body.is_empty() && !body.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(&fence);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
