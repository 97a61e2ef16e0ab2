use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::error::GatewayError;
use crate::request::{CompletionRequest, CompletionResponse, ProviderConfig};
use crate::Provider;

const MAX_BACKOFF: Duration = Duration::from_secs(60);

/// Delay before retry number `attempt` (0-based): `base * 2^attempt`, capped
/// at one minute. Non-decreasing in `attempt`.
pub fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let factor = 1u64.checked_shl(attempt.min(32)).unwrap_or(u64::MAX);
    Duration::from_millis(base_ms.saturating_mul(factor)).min(MAX_BACKOFF)
}

/// Chat-completions client for OpenAI-compatible endpoints.
pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("config", &self.config).finish()
    }
}

enum Attempt {
    Done(CompletionResponse),
    Retry(u16),
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        config.check()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn api_key(&self) -> Result<String, GatewayError> {
        match std::env::var(&self.config.api_key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(GatewayError::AuthError(format!(
                "environment variable {} is not set",
                self.config.api_key_env
            ))),
        }
    }

    fn attempt(&self, body: &str, key: &str, retries: u32) -> Result<Attempt, GatewayError> {
        let started = Instant::now();
        let result = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(GatewayError::Timeout),
            Err(e) => return Err(GatewayError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Err(GatewayError::Timeout),
            Err(e) => return Err(GatewayError::Transport(e.to_string())),
        };
        match status {
            200..=299 => {
                let latency_ms = started.elapsed().as_millis() as u64;
                decode(&text, latency_ms, retries).map(Attempt::Done)
            }
            401 | 403 => Err(GatewayError::AuthError(format!("status {status}"))),
            429 | 500..=599 => Ok(Attempt::Retry(status)),
            _ => Err(GatewayError::HttpStatus {
                status,
                body: text.chars().take(500).collect(),
            }),
        }
    }
}

/// JSON body for a chat-completions call.
pub fn wire_body(request: &CompletionRequest) -> Value {
    let mut messages = Vec::new();
    if let Some(system) = &request.system {
        messages.push(json!({"role": "system", "content": system}));
    }
    messages.push(json!({"role": "user", "content": request.prompt}));
    let mut body = json!({
        "model": request.model_id,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    });
    if let Some(stop) = &request.stop {
        body["stop"] = json!(stop);
    }
    body
}

fn decode(text: &str, latency_ms: u64, retries: u32) -> Result<CompletionResponse, GatewayError> {
    let v: Value = serde_json::from_str(text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = v
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("no choices[0].message.content".into()))?;
    let usage = |field: &str| {
        v.get("usage")
            .and_then(|u| u.get(field))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(CompletionResponse {
        text: content.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        latency_ms,
        provider: "http".into(),
        retries,
    })
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.check()?;
        let key = self.api_key()?;
        let body = wire_body(request).to_string();
        let mut retries = 0;
        loop {
            match self.attempt(&body, &key, retries)? {
                Attempt::Done(resp) => return Ok(resp),
                Attempt::Retry(status) if retries >= self.config.max_retries => {
                    return Err(if status == 429 {
                        GatewayError::RateLimited { retries }
                    } else {
                        GatewayError::ServerError { status, retries }
                    });
                }
                Attempt::Retry(_) => {
                    std::thread::sleep(backoff_delay(self.config.backoff_base_ms, retries));
                    retries += 1;
                }
            }
        }
    }
}
