//! Parsing model completions into actions.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ActionKind {
    Sql(String),
    Script(String),
    Answer(String),
}

/// A parsed model turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// The completion text as returned by the backend.
    pub raw: String,
    pub log_prob: Option<f64>,
}

impl Action {
    pub fn is_code(&self) -> bool {
        !matches!(self.kind, ActionKind::Answer(_))
    }

    pub fn answer(&self) -> Option<&str> {
        match &self.kind {
            ActionKind::Answer(a) => Some(a),
            _ => None,
        }
    }
}

const MARKERS: [&str; 3] = ["sql:", "python:", "answer:"];
const FENCE: &str = "``";

/// Finds the first of `SQL:`, `Python:`, `Answer:` (case-insensitive) and
/// extracts the double-backtick fenced payload that follows it. Text without
/// any marker is taken as a direct answer.
pub fn parse_action(completion: &str, log_prob: Option<f64>) -> Action {
    Action {
        kind: parse_kind(completion),
        raw: completion.to_string(),
        log_prob,
    }
}

/// Parses the continuation of a forced prompt, which already ends with the
/// opening `Answer: ``` of the answer grammar.
pub fn parse_forced_answer(completion: &str, log_prob: Option<f64>) -> Action {
    let payload = match completion.find(FENCE) {
        Some(end) => &completion[..end],
        None => completion,
    };
    Action {
        kind: ActionKind::Answer(payload.trim().to_string()),
        raw: completion.to_string(),
        log_prob,
    }
}

fn parse_kind(text: &str) -> ActionKind {
    // ASCII lowering keeps byte offsets aligned with `text`.
    let lowered = text.to_ascii_lowercase();
    let found = MARKERS
        .iter()
        .enumerate()
        .filter_map(|(i, m)| lowered.find(m).map(|pos| (pos, i, m.len())))
        .min();
    let Some((pos, which, len)) = found else {
        return ActionKind::Answer(text.trim().to_string());
    };
    let payload = fenced_payload(&text[pos + len..]);
    match which {
        0 => ActionKind::Sql(payload),
        1 => ActionKind::Script(payload),
        _ => ActionKind::Answer(payload),
    }
}

fn fenced_payload(rest: &str) -> String {
    let Some(open) = rest.find(FENCE) else {
        let trimmed = rest.trim();
        return trimmed.strip_suffix('.').unwrap_or(trimmed).trim().to_string();
    };
    let body = &rest[open + FENCE.len()..];
    let body = match body.find(FENCE) {
        Some(close) => &body[..close],
        None => body,
    };
    body.trim().to_string()
}
