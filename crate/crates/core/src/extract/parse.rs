//! Parsing model replies into candidate definition fields.

use serde::{Deserialize, Serialize};

use crate::dataset::DefType;

#[derive(Debug, thiserror::Error)]
#[error("unparseable model response: {0}")]
pub struct Unparseable(pub String);

/// The record shape models are asked to emit: definition and type required,
/// term and context optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    pub definition: String,
    #[serde(rename = "type")]
    pub def_type: DefType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

/// Map the label vocabulary models actually use onto the two types.
/// Anything unrecognized becomes `Implicit` (the weaker, non-verbatim claim)
/// with a warning.
fn normalize_type(raw: &str) -> DefType {
    match raw.trim().to_lowercase().as_str() {
        "explicit" | "verbatim" | "quote" => DefType::Explicit,
        "implicit" | "paraphrase" | "paraphrased" => DefType::Implicit,
        other => {
            log::warn!("unknown definition type {other:?}; treating as implicit");
            DefType::Implicit
        }
    }
}

/// Strip a Markdown code fence if the content is wrapped in one.
fn strip_fence(content: &str) -> &str {
    let trimmed = content.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // Drop the info string ("json", "JSON", ...) on the opening line.
    let rest = match rest.find('\n') {
        Some(pos) => &rest[pos + 1..],
        None => rest,
    };
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Remove trailing commas before `]` or `}`, outside string literals.
fn strip_trailing_commas(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = json.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|ch| !ch.is_whitespace());
                if !matches!(next, Some(']') | Some('}')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn value_to_records(value: serde_json::Value) -> Result<Vec<CandidateFields>, String> {
    let objects = match value {
        serde_json::Value::Array(items) => items,
        obj @ serde_json::Value::Object(_) => vec![obj],
        other => return Err(format!("expected an object or array, got {other}")),
    };
    let total = objects.len();
    let mut records = Vec::new();
    for obj in objects {
        let serde_json::Value::Object(map) = obj else {
            continue;
        };
        let Some(definition) = map.get("definition").and_then(|v| v.as_str()) else {
            continue;
        };
        if definition.trim().is_empty() {
            continue;
        }
        let Some(type_str) = map.get("type").and_then(|v| v.as_str()) else {
            continue;
        };
        let as_opt_string = |key: &str| {
            map.get(key)
                .and_then(|v| v.as_str())
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        records.push(CandidateFields {
            term: as_opt_string("term"),
            definition: definition.trim().to_string(),
            def_type: normalize_type(type_str),
            context: as_opt_string("context"),
        });
    }
    if records.is_empty() && total > 0 {
        return Err(format!(
            "{total} record(s) present but none carried both definition and type"
        ));
    }
    if records.len() < total {
        log::warn!(
            "dropped {} record(s) missing definition or type",
            total - records.len()
        );
    }
    Ok(records)
}

/// Parse a model reply into candidate records.
///
/// Accepts a JSON array of records, a single record object, or either
/// wrapped in a code fence. A repair pass strips fences and trailing commas
/// before giving up. An empty array is a valid "no definitions" reply.
pub fn parse_response(content: &str) -> Result<Vec<CandidateFields>, Unparseable> {
    let stripped = strip_fence(content);
    let value = serde_json::from_str::<serde_json::Value>(stripped)
        .or_else(|_| serde_json::from_str::<serde_json::Value>(&strip_trailing_commas(stripped)));
    match value {
        Ok(v) => value_to_records(v).map_err(Unparseable),
        Err(e) => Err(Unparseable(format!("not JSON after repair: {e}"))),
    }
}
