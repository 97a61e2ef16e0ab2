use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub prompt: String,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            prompt: prompt.into(),
            system: None,
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: None,
        }
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be a finite number >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 (hex) of the request's JSON serialization. Fields serialize in
    /// declaration order and every field is always present, so equal requests
    /// hash equally and any field change changes the hash.
    pub fn content_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("request serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub provider: String,
    /// Retries spent before this response arrived.
    #[serde(default)]
    pub retries: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Base of the API, e.g. `https://api.openai.com/v1`; requests go to
    /// `{base_url}/chat/completions`.
    pub base_url: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is read at call time and never stored.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_s: 60.0,
            max_retries: 5,
            backoff_base_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl ProviderConfig {
    pub fn check(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if self.base_url.trim().is_empty() {
            return bad("base_url is empty");
        }
        if self.api_key_env.trim().is_empty() {
            return bad("api_key_env is empty");
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return bad("timeout_s must be positive");
        }
        if self.backoff_base_ms == 0 {
            return bad("backoff_base_ms must be positive");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be positive");
        }
        Ok(())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_field() {
        let base = CompletionRequest::new("gpt-4-0613", "hello");
        let h = base.content_hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, base.clone().content_hash());

        let variants = [
            CompletionRequest {
                model_id: "gpt-3.5-turbo".into(),
                ..base.clone()
            },
            CompletionRequest {
                prompt: "hello!".into(),
                ..base.clone()
            },
            CompletionRequest {
                system: Some("s".into()),
                ..base.clone()
            },
            CompletionRequest {
                temperature: 0.1,
                ..base.clone()
            },
            CompletionRequest {
                max_tokens: 200,
                ..base.clone()
            },
            CompletionRequest {
                stop: Some(vec!["\n\n".into()]),
                ..base.clone()
            },
        ];
        for v in variants {
            assert_ne!(v.content_hash(), h, "{v:?}");
        }
    }

    #[test]
    fn defaults() {
        let r: CompletionRequest = serde_json::from_str(r#"{"model_id":"m","prompt":"p"}"#).unwrap();
        assert_eq!(r, CompletionRequest::new("m", "p"));
        assert_eq!(r.max_tokens, 512);
        assert_eq!(r.temperature, 0.0);
    }

    #[test]
    fn invalid_requests() {
        assert!(CompletionRequest::new("m", "").check().is_err());
        let r = CompletionRequest {
            temperature: -1.0,
            ..CompletionRequest::new("m", "p")
        };
        assert!(r.check().is_err());
        let r = CompletionRequest {
            max_tokens: 0,
            ..CompletionRequest::new("m", "p")
        };
        assert!(r.check().is_err());
        assert!(ProviderConfig {
            max_in_flight: 0,
            ..ProviderConfig::default()
        }
        .check()
        .is_err());
        assert!(ProviderConfig::default().check().is_ok());
    }
}
