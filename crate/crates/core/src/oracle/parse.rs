//! Tolerant parsers for provider replies.
//!
//! Replies are matched case-insensitively with surrounding punctuation,
//! quotes and markdown fences ignored. Each parser either returns a value or
//! a short reason used in the reprompt/protocol error.

use serde_json::Value;

use super::GateAnswer;
use crate::model::EvidenceLabel;

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn gate_word(w: &str) -> Option<GateAnswer> {
    match w {
        "yes" | "true" => Some(GateAnswer::Yes),
        "no" | "false" => Some(GateAnswer::No),
        "unknown" => Some(GateAnswer::Unknown),
        _ => None,
    }
}

/// `yes` / `no` / `unknown`, from either the leading word or the only such
/// word present.
pub fn gate_answer(text: &str) -> Option<GateAnswer> {
    let ws = words(text);
    if let Some(a) = ws.first().and_then(|w| gate_word(w)) {
        return Some(a);
    }
    if let Some(a) = ws.iter().position(|w| w == "answer").and_then(|i| ws.get(i + 1)).and_then(|w| gate_word(w)) {
        return Some(a);
    }
    let mut found = ws.iter().filter_map(|w| gate_word(w));
    let first = found.next()?;
    if found.all(|a| a == first) {
        Some(first)
    } else {
        None
    }
}

pub fn yes_no(text: &str) -> Option<bool> {
    match gate_answer(text)? {
        GateAnswer::Yes => Some(true),
        GateAnswer::No => Some(false),
        GateAnswer::Unknown => None,
    }
}

fn label_word(w: &str) -> Option<EvidenceLabel> {
    let w = w.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    match w.as_str() {
        "supports" | "support" | "supported" | "sup" | "s" => Some(EvidenceLabel::Sup),
        "contradicts" | "contradict" | "contradicted" | "con" | "c" => Some(EvidenceLabel::Con),
        "irrelevant" | "irr" | "unrelated" | "i" => Some(EvidenceLabel::Irr),
        _ => None,
    }
}

/// Strips a ```json fence if present.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_alphanumeric());
        if let Some(end) = rest.rfind("```") {
            return rest[..end].trim();
        }
    }
    t
}

/// First balanced JSON value starting with `open` that parses.
fn json_block(text: &str, open: char, close: char) -> Option<Value> {
    let t = unfence(text);
    let mut starts = t.match_indices(open).map(|(i, _)| i);
    starts.find_map(|start| {
        let mut depth = 0i32;
        let mut in_str = false;
        let mut escaped = false;
        for (off, c) in t[start..].char_indices() {
            if in_str {
                match c {
                    _ if escaped => escaped = false,
                    '\\' => escaped = true,
                    '"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            if c == '"' {
                in_str = true;
            } else if c == open {
                depth += 1;
            } else if c == close {
                depth -= 1;
                if depth == 0 {
                    return serde_json::from_str(&t[start..start + off + c.len_utf8()]).ok();
                }
            }
        }
        None
    })
}

pub fn json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    match json_block(text, '{', '}')? {
        Value::Object(m) => Some(m),
        _ => None,
    }
}

/// A JSON array of strings, or failing that a newline list with bullets or
/// numbering stripped.
pub fn string_list(text: &str) -> Option<Vec<String>> {
    if let Some(Value::Array(items)) = json_block(text, '[', ']') {
        let strs: Option<Vec<String>> = items.iter().map(|v| v.as_str().map(str::to_string)).collect();
        if let Some(s) = strs {
            return Some(s);
        }
    }
    let lines: Vec<String> = unfence(text)
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        None
    } else {
        Some(lines)
    }
}

fn strip_list_marker(line: &str) -> String {
    let l = line.trim();
    let l = l.trim_start_matches(['-', '*', '•']).trim_start();
    let l = if let Some(rest) = l.strip_prefix('[') {
        match rest.find(']') {
            Some(i) if rest[..i].chars().all(|c| c.is_ascii_digit()) => rest[i + 1..].trim_start(),
            _ => l,
        }
    } else {
        l
    };
    let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
    let l = if digits > 0 && l[digits..].starts_with(['.', ')', ':']) {
        l[digits + 1..].trim_start()
    } else {
        l
    };
    l.trim_matches(|c| c == '"' || c == ',').trim().to_string()
}

pub fn evidence_labels(text: &str, expected: usize) -> Result<Vec<EvidenceLabel>, String> {
    let items = string_list(text).ok_or_else(|| "no label list found".to_string())?;
    let labels: Vec<EvidenceLabel> = items
        .iter()
        .map(|i| label_word(i).ok_or_else(|| format!("unknown label {i:?}")))
        .collect::<Result<_, _>>()?;
    if labels.len() != expected {
        return Err(format!("expected {expected} labels, got {}", labels.len()));
    }
    Ok(labels)
}

/// `name = [ ... ]` assignment inside free text (chain-of-thought replies).
pub fn assigned_list(text: &str, name: &str) -> Option<Vec<String>> {
    let at = text.find(name)?;
    let rest = &text[at + name.len()..];
    let rest = rest.trim_start().strip_prefix('=')?;
    match json_block(rest, '[', ']') {
        Some(Value::Array(items)) => items.iter().map(|v| v.as_str().map(str::to_string)).collect(),
        _ => {
            // Python-style single quotes.
            let open = rest.find('[')?;
            let close = rest[open..].find(']')? + open;
            let inner = &rest[open + 1..close];
            let fixed = format!("[{}]", inner.replace('\'', "\""));
            serde_json::from_str::<Vec<String>>(&fixed).ok()
        }
    }
}

/// A field of a JSON object reply, lowercased and trimmed.
pub fn verdict_field(text: &str, field: &str) -> Option<(String, Option<String>)> {
    let obj = json_object(text)?;
    let v = obj.get(field)?.as_str()?.trim().to_lowercase();
    let reason = obj.get("reason").and_then(|r| r.as_str()).map(str::to_string);
    Some((v, reason))
}
