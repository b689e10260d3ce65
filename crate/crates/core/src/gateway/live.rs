//! HTTP adapters for chat-completion and embedding services that speak the
//! common `/chat/completions` and `/embeddings` JSON shapes.

use std::time::Duration;

use serde_json::{json, Value};

use super::embed::{normalize, Embedder};
use super::{CompletionProvider, CompletionRequest, EmbedError, ProviderError, ProviderReply};

pub const DEFAULT_EMBED_MODEL: &str = "all-MiniLM-L6-v2";
const EMBED_RETRIES: usize = 3;

const SYSTEM_PROMPT: &str = "You are one agent in an automated graph neural network design \
pipeline. Reply with a single JSON object that follows the requested schema and nothing else.";

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .new_agent()
}

fn endpoint(base_url: &str, path: &str) -> String {
    format!("{}/{}", base_url.trim_end_matches('/'), path)
}

fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, String> {
    let mut request = agent.post(url);
    if let Some(key) = api_key {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response = request.send_json(body).map_err(|e| e.to_string())?;
    response
        .body_mut()
        .read_json::<Value>()
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
pub struct LiveProvider {
    agent: ureq::Agent,
    base_url: String,
    model: String,
    api_key: Option<String>,
}

impl LiveProvider {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            agent: agent(timeout),
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key,
        }
    }
}

impl CompletionProvider for LiveProvider {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let mut user = req.prompt.to_string();
        if let Some(feedback) = req.feedback {
            user.push_str("\n\nYour previous reply was rejected: ");
            user.push_str(feedback);
            user.push_str("\nReply again with a corrected JSON object.");
        }
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user},
            ],
        });
        let url = endpoint(&self.base_url, "chat/completions");
        let reply = post_json(&self.agent, &url, self.api_key.as_deref(), &body)
            .map_err(ProviderError::Transport)?;
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response has no message content".into()))?
            .to_string();
        let tokens = reply["usage"]["total_tokens"].as_u64();
        Ok(ProviderReply { text, tokens })
    }
}

/// Embedding service client. Dimension is whatever the service returns.
#[derive(Debug, Clone)]
pub struct LiveEmbedder {
    agent: ureq::Agent,
    base_url: String,
    model: String,
    api_key: Option<String>,
}

impl LiveEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            agent: agent(timeout),
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key,
        }
    }

    fn request(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>, String> {
        let body = json!({"model": self.model, "input": inputs});
        let url = endpoint(&self.base_url, "embeddings");
        let reply = post_json(&self.agent, &url, self.api_key.as_deref(), &body)?;
        let data = reply["data"]
            .as_array()
            .ok_or("response has no `data` array")?;
        if data.len() != inputs.len() {
            return Err(format!("asked for {} embeddings, got {}", inputs.len(), data.len()));
        }
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (pos, row) in data.iter().enumerate() {
            let index = row["index"].as_u64().map_or(pos, |i| i as usize);
            let vector = row["embedding"]
                .as_array()
                .ok_or("embedding row without `embedding`")?
                .iter()
                .map(|x| x.as_f64().ok_or("non-numeric embedding value"))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push((index, vector));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

impl Embedder for LiveEmbedder {
    fn name(&self) -> &str {
        &self.model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let wanted: Vec<&str> = texts
            .iter()
            .map(String::as_str)
            .filter(|t| !t.trim().is_empty())
            .collect();
        let mut vectors = if wanted.is_empty() {
            Vec::new()
        } else {
            let mut last_error = String::new();
            let mut result = None;
            for _ in 0..EMBED_RETRIES {
                match self.request(&wanted) {
                    Ok(v) => {
                        result = Some(v);
                        break;
                    }
                    Err(e) => last_error = e,
                }
            }
            result.ok_or(EmbedError::Unreachable {
                attempts: EMBED_RETRIES,
                message: last_error,
            })?
        };
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(EmbedError::Malformed("embeddings of mixed dimension".into()));
        }
        vectors.iter_mut().for_each(|v| normalize(v));
        let mut filled = vectors.into_iter();
        Ok(texts
            .iter()
            .map(|t| {
                if t.trim().is_empty() {
                    vec![0.0; dim]
                } else {
                    filled.next().unwrap_or_default()
                }
            })
            .collect())
    }
}
