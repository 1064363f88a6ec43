//! Tolerant parsing of LLM routing transcripts.
//!
//! The first JSON object found anywhere in the transcript is the decision;
//! surrounding prose and code fences are ignored. Nothing here fails: any
//! malformed or empty answer becomes a fallback-to-all decision that keeps
//! the raw transcript for audit.

use serde_json::{Map, Value};

use crate::corpus::Modality;

use super::{Origin, RoutingDecision};

/// End offset (exclusive) of the balanced `{...}` starting at `start`,
/// honoring JSON string escapes.
fn balanced_end(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, ch) in s[start..].char_indices() {
        if in_str {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First substring that parses as a JSON object.
pub fn extract_first_object(raw: &str) -> Option<Map<String, Value>> {
    for (start, _) in raw.match_indices('{') {
        let Some(end) = balanced_end(raw, start) else { continue };
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[start..end]) {
            return Some(map);
        }
    }
    None
}

/// Maps an LLM transcript to a decision. Keys match wire names
/// case-insensitively in emission order; unknown keys are ignored and
/// non-string or blank values fall back to `original_query`.
pub fn parse_router_response(raw: &str, original_query: &str) -> RoutingDecision {
    let selections: Vec<(Modality, String)> = extract_first_object(raw)
        .map(|obj| {
            obj.into_iter()
                .filter_map(|(k, v)| {
                    let m = Modality::from_wire(&k)?;
                    let q = match v {
                        Value::String(s) if !s.trim().is_empty() => s,
                        _ => original_query.to_owned(),
                    };
                    Some((m, q))
                })
                .collect()
        })
        .unwrap_or_default();
    RoutingDecision::new(selections, Origin::Llm, original_query)
        .unwrap_or_else(|| RoutingDecision::all(original_query, Origin::FallbackAll))
        .with_raw_response(raw)
}
