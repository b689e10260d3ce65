//! Provider-agnostic completion and embedding layer.
//!
//! Every call goes through [`Gateway`], which validates structured outputs
//! against the template's schema, retries with the validation error as
//! feedback, and records the call in the [`Transcript`].

mod embed;
mod envelope;
mod live;
pub mod schema;
mod scripted;
mod transcript;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use embed::{cosine, l2_norm, normalize, Embedder, HashEmbedder, HASH_V1_DIM};
pub use envelope::{truncate_chars, InjectedKnowledge, PromptEnvelope, TemplateId, MAX_INJECTED_CHARS};
pub use live::{LiveEmbedder, LiveProvider, DEFAULT_EMBED_MODEL};
pub use scripted::{FixtureError, ScriptedProvider};
pub use transcript::{CompletionOutcome, Transcript, TranscriptEntry};

use crate::clock::{Clock, LogicalClock};

pub const MAX_ATTEMPTS: u32 = 3;

pub struct CompletionRequest<'a> {
    pub envelope: &'a PromptEnvelope,
    /// Rendered template text.
    pub prompt: &'a str,
    /// 1-based attempt number.
    pub attempt: u32,
    /// Validation error from the previous attempt.
    pub feedback: Option<&'a str>,
}

#[derive(Debug, Clone)]
pub struct ProviderReply {
    pub text: String,
    /// Token usage reported by the provider, if any.
    pub tokens: Option<u64>,
}

#[derive(Debug, Clone, Error)]
pub enum ProviderError {
    #[error("no scripted fixture for template {template} (slot digest {digest})")]
    ScriptMiss { template: TemplateId, digest: String },
    #[error("provider transport failure: {0}")]
    Transport(String),
}

pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<ProviderReply, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredResponse {
    pub template_id: TemplateId,
    pub payload: Value,
    pub raw_text: String,
    pub attempts: u32,
}

impl StructuredResponse {
    /// Deserializes the (already validated) payload into its schema type.
    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T, CompletionError> {
        T::deserialize(&self.payload).map_err(|e| CompletionError {
            template: self.template_id,
            attempts: vec![FailedAttempt {
                raw_text: self.raw_text.clone(),
                error: e.to_string(),
            }],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedAttempt {
    pub raw_text: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{template} failed after {} attempt(s): {}", attempts.len(), attempts.last().map(|a| a.error.as_str()).unwrap_or("no attempts"))]
pub struct CompletionError {
    pub template: TemplateId,
    pub attempts: Vec<FailedAttempt>,
}

#[derive(Debug, Clone, Error)]
pub enum EmbedError {
    #[error("embedding service unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: usize, message: String },
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Error)]
pub enum GatewayError {
    #[error("template {template} is missing slot `{slot}`")]
    MissingSlot { template: TemplateId, slot: String },
    #[error(transparent)]
    ScriptMiss(ProviderError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Pulls a JSON object out of a reply, tolerating a surrounding code fence.
fn parse_reply(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    let body = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|rest| rest.strip_suffix("```"))
        .unwrap_or(trimmed);
    serde_json::from_str(body.trim()).map_err(|e| format!("reply is not valid JSON: {e}"))
}

fn chars_to_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}

pub struct Gateway {
    completion: Arc<dyn CompletionProvider>,
    embedder: Arc<dyn Embedder>,
    clock: Arc<dyn Clock>,
    transcript: Transcript,
}

impl Gateway {
    pub fn new(
        completion: Arc<dyn CompletionProvider>,
        embedder: Arc<dyn Embedder>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            completion,
            embedder,
            clock,
            transcript: Transcript::new(),
        }
    }

    /// Scripted provider, hash-v1 embeddings and a logical clock.
    pub fn scripted(provider: ScriptedProvider) -> Self {
        Self::new(
            Arc::new(provider),
            Arc::new(HashEmbedder),
            Arc::new(LogicalClock::new()),
        )
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn embedder_name(&self) -> &str {
        self.embedder.name()
    }

    pub fn complete(&self, env: &PromptEnvelope) -> Result<StructuredResponse, GatewayError> {
        let start = self.clock.now_ms();
        let prompt = env.render();
        let mut tokens = 0u64;
        let mut failures: Vec<FailedAttempt> = Vec::new();

        let result = if let Some(slot) = env.missing_slots().first() {
            Err(GatewayError::MissingSlot {
                template: env.template_id,
                slot: slot.to_string(),
            })
        } else {
            self.attempt_loop(env, &prompt, &mut tokens, &mut failures)
        };

        let outcome = match &result {
            Ok(response) => CompletionOutcome::Response(response.clone()),
            Err(e) => CompletionOutcome::Error {
                message: e.to_string(),
                raw_attempts: failures.iter().map(|f| f.raw_text.clone()).collect(),
            },
        };
        self.transcript.push(TranscriptEntry::Completion {
            provider: self.completion.name().to_string(),
            envelope: env.clone(),
            outcome,
            wall_ms: self.clock.now_ms().saturating_sub(start),
            token_estimate: tokens,
        });
        result
    }

    fn attempt_loop(
        &self,
        env: &PromptEnvelope,
        prompt: &str,
        tokens: &mut u64,
        failures: &mut Vec<FailedAttempt>,
    ) -> Result<StructuredResponse, GatewayError> {
        for attempt in 1..=MAX_ATTEMPTS {
            let feedback = failures.last().map(|f| f.error.clone());
            let request = CompletionRequest {
                envelope: env,
                prompt,
                attempt,
                feedback: feedback.as_deref(),
            };
            let reply = match self.completion.complete(&request) {
                Ok(reply) => reply,
                Err(miss @ ProviderError::ScriptMiss { .. }) => {
                    return Err(GatewayError::ScriptMiss(miss))
                }
                Err(ProviderError::Transport(message)) => {
                    *tokens += chars_to_tokens(prompt.chars().count());
                    failures.push(FailedAttempt {
                        raw_text: String::new(),
                        error: message,
                    });
                    continue;
                }
            };
            *tokens += reply
                .tokens
                .unwrap_or_else(|| chars_to_tokens(prompt.chars().count() + reply.text.chars().count()));
            let checked = parse_reply(&reply.text)
                .and_then(|payload| schema::validate_payload(env, &payload).map(|()| payload));
            match checked {
                Ok(payload) => {
                    return Ok(StructuredResponse {
                        template_id: env.template_id,
                        payload,
                        raw_text: reply.text,
                        attempts: attempt,
                    })
                }
                Err(error) => failures.push(FailedAttempt {
                    raw_text: reply.text,
                    error,
                }),
            }
        }
        Err(GatewayError::Completion(CompletionError {
            template: env.template_id,
            attempts: failures.clone(),
        }))
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let start = self.clock.now_ms();
        let result = self.embedder.embed(texts);
        self.transcript.push(TranscriptEntry::Embedding {
            provider: self.embedder.name().to_string(),
            texts: texts.len(),
            error: result.as_ref().err().map(ToString::to_string),
            wall_ms: self.clock.now_ms().saturating_sub(start),
            token_estimate: self.embedder.token_estimate(texts),
        });
        Ok(result?)
    }
}
