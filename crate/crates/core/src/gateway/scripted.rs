//! Fixture-driven completion provider.
//!
//! Fixtures are JSON lines, one record per line (blank lines and lines
//! starting with `#` are skipped):
//!
//! ```text
//! {"template_id": "make-task-plan", "slot_digest": "9c0e…", "payload": {...}}
//! {"template_id": "review-results", "match": {"revisions_used": "0"}, "payload": {...}}
//! {"template_id": "review-results", "slot_digest": "*", "payload": {...}}
//! {"template_id": "make-feature-plan", "attempt": 1, "raw": "not json"}
//! ```
//!
//! A record answers an envelope by exact slot digest, by `match` conditions
//! on slot values, or as a wildcard (`"*"` or no key at all), in that order
//! of precedence. Records pinned to an `attempt` win over unpinned ones in
//! the same class; ties go to the earlier line. Match conditions are either
//! an exact string or an object with `lt`/`le`/`gt`/`ge` (numeric) or
//! `contains` (substring); the pseudo-slot `@injected` refers to the
//! comma-joined injected item ids.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::envelope::{PromptEnvelope, TemplateId};
use super::{CompletionProvider, CompletionRequest, ProviderError, ProviderReply};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Condition {
    Exact(String),
    Compare(Comparison),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Comparison {
    lt: Option<f64>,
    le: Option<f64>,
    gt: Option<f64>,
    ge: Option<f64>,
    contains: Option<String>,
}

impl Condition {
    fn holds(&self, value: &str) -> bool {
        match self {
            Condition::Exact(expected) => expected == value,
            Condition::Compare(c) => {
                if let Some(needle) = &c.contains {
                    if !value.contains(needle.as_str()) {
                        return false;
                    }
                }
                let numeric = [c.lt, c.le, c.gt, c.ge].iter().any(Option::is_some);
                if !numeric {
                    return true;
                }
                let Ok(x) = value.trim().parse::<f64>() else {
                    return false;
                };
                c.lt.is_none_or(|b| x < b)
                    && c.le.is_none_or(|b| x <= b)
                    && c.gt.is_none_or(|b| x > b)
                    && c.ge.is_none_or(|b| x >= b)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureRecord {
    template_id: TemplateId,
    #[serde(default)]
    slot_digest: Option<String>,
    #[serde(default, rename = "match")]
    conditions: BTreeMap<String, Condition>,
    #[serde(default)]
    attempt: Option<u32>,
    #[serde(default)]
    payload: Option<Value>,
    #[serde(default)]
    raw: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MatchClass {
    Digest,
    Conditions,
    Wildcard,
}

impl FixtureRecord {
    fn class(&self) -> MatchClass {
        match self.slot_digest.as_deref() {
            Some(d) if d != "*" => MatchClass::Digest,
            _ if !self.conditions.is_empty() => MatchClass::Conditions,
            _ => MatchClass::Wildcard,
        }
    }

    fn answers(&self, env: &PromptEnvelope, digest: &str, attempt: u32) -> bool {
        if self.template_id != env.template_id || self.attempt.is_some_and(|a| a != attempt) {
            return false;
        }
        if let Some(d) = self.slot_digest.as_deref() {
            if d != "*" && d != digest {
                return false;
            }
        }
        let injected = env.injected_ids().collect::<Vec<_>>().join(",");
        self.conditions.iter().all(|(slot, cond)| {
            let value = if slot == "@injected" {
                Some(injected.as_str())
            } else {
                env.slots.get(slot).map(String::as_str)
            };
            value.is_some_and(|v| cond.holds(v))
        })
    }

    fn text(&self) -> String {
        match (&self.raw, &self.payload) {
            (Some(raw), _) => raw.clone(),
            (None, Some(payload)) => payload.to_string(),
            (None, None) => String::new(),
        }
    }
}

/// Deterministic provider answering from fixture records. Its output is a
/// pure function of the template, the slots, the injected ids and the
/// attempt number.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    records: Vec<FixtureRecord>,
}

impl ScriptedProvider {
    pub fn from_jsonl(text: &str) -> Result<Self, FixtureError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let record: FixtureRecord =
                serde_json::from_str(line).map_err(|e| FixtureError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if record.payload.is_some() == record.raw.is_some() {
                return Err(FixtureError::Parse {
                    line: i + 1,
                    message: "exactly one of `payload` or `raw` is required".into(),
                });
            }
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn from_file(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text)
    }

    /// Appends the records of another fixture set; earlier records keep precedence.
    pub fn extend(&mut self, other: ScriptedProvider) {
        self.records.extend(other.records);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let digest = req.envelope.slot_digest();
        let chosen = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.answers(req.envelope, &digest, req.attempt))
            .min_by_key(|(i, r)| (r.class(), r.attempt.is_none(), *i))
            .map(|(_, r)| r);
        match chosen {
            Some(record) => Ok(ProviderReply {
                text: record.text(),
                tokens: None,
            }),
            None => Err(ProviderError::ScriptMiss {
                template: req.envelope.template_id,
                digest,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(env: &PromptEnvelope, attempt: u32) -> CompletionRequest<'_> {
        CompletionRequest {
            envelope: env,
            prompt: "",
            attempt,
            feedback: None,
        }
    }

    #[test]
    fn precedence_digest_then_match_then_wildcard() {
        let env = PromptEnvelope::new(TemplateId::CompileReport).slot("dataset", "toy-cora");
        let fixture = format!(
            "{}\n{}\n{}\n",
            r#"{"template_id":"compile-report","payload":{"summary":"wild"}}"#,
            r#"{"template_id":"compile-report","match":{"dataset":"toy-cora"},"payload":{"summary":"match"}}"#,
            format_args!(
                r#"{{"template_id":"compile-report","slot_digest":"{}","payload":{{"summary":"digest"}}}}"#,
                env.slot_digest()
            ),
        );
        let provider = ScriptedProvider::from_jsonl(&fixture).unwrap();
        let reply = provider.complete(&request(&env, 1)).unwrap();
        assert_eq!(reply.text, r#"{"summary":"digest"}"#);

        let other = PromptEnvelope::new(TemplateId::CompileReport).slot("dataset", "toy-cora").slot("x", "y");
        assert_eq!(provider.complete(&request(&other, 1)).unwrap().text, r#"{"summary":"match"}"#);

        let third = PromptEnvelope::new(TemplateId::CompileReport).slot("dataset", "toy-mol");
        assert_eq!(provider.complete(&request(&third, 1)).unwrap().text, r#"{"summary":"wild"}"#);
    }

    #[test]
    fn numeric_and_injected_conditions() {
        let fixture = r#"
{"template_id":"review-results","match":{"best_score":{"lt":0.8}},"payload":{"verdict":"revise","hints":["widen-ops"]}}
{"template_id":"review-results","match":{"@injected":{"contains":"run-1"}},"payload":{"verdict":"accept","rationale":"seen"}}
"#;
        let provider = ScriptedProvider::from_jsonl(fixture).unwrap();
        let low = PromptEnvelope::new(TemplateId::ReviewResults).slot("best_score", "0.7500");
        assert!(provider.complete(&request(&low, 1)).unwrap().text.contains("revise"));
        let high = PromptEnvelope::new(TemplateId::ReviewResults)
            .slot("best_score", "0.8500")
            .inject("run-1/f01", "report");
        assert!(provider.complete(&request(&high, 1)).unwrap().text.contains("seen"));
        let miss = PromptEnvelope::new(TemplateId::ReviewResults).slot("best_score", "0.9");
        assert!(matches!(
            provider.complete(&request(&miss, 1)),
            Err(ProviderError::ScriptMiss { .. })
        ));
    }

    #[test]
    fn attempt_pinned_records() {
        let fixture = r#"
{"template_id":"compile-report","raw":"oops"}
{"template_id":"compile-report","attempt":2,"payload":{"summary":"ok"}}
"#;
        let provider = ScriptedProvider::from_jsonl(fixture).unwrap();
        let env = PromptEnvelope::new(TemplateId::CompileReport);
        assert_eq!(provider.complete(&request(&env, 1)).unwrap().text, "oops");
        assert_eq!(provider.complete(&request(&env, 2)).unwrap().text, r#"{"summary":"ok"}"#);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ScriptedProvider::from_jsonl("\n{\"template_id\": \"nope\", \"raw\": \"\"}").unwrap_err();
        assert!(matches!(err, FixtureError::Parse { line: 2, .. }));
        let err = ScriptedProvider::from_jsonl(r#"{"template_id":"compile-report"}"#).unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }
}
