//! OpenAI-compatible chat-completions backend.
//!
//! Wire shape: `POST {base_url}/chat/completions` with `model`, `messages`,
//! `temperature`, `top_p`, `max_tokens` (plus `seed` when set); the bearer
//! token comes from the environment variable named in the config; the
//! completion text is `choices[0].message.content`.

use std::time::Duration;

use serde_json::json;

use super::{Backend, BackendConfig, BackendFailure, ChatMessage, SamplingParams};
use crate::error::{Error, Result};

pub struct HttpBackend {
    config: BackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        if config.base_url.is_none() {
            return Err(Error::validation(format!(
                "backend {} has no base_url; it cannot be used live",
                config.backend_id
            )));
        }
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.request_timeout_secs)))
            .build()
            .new_agent();
        Ok(HttpBackend { config, agent })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn api_key(&self) -> std::result::Result<String, BackendFailure> {
        let var = self.config.api_key_env_var.as_deref().unwrap_or_default();
        std::env::var(var).map_err(|_| {
            BackendFailure::Fatal(format!("environment variable {var} is not set"))
        })
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.config.backend_id
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete_once(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> std::result::Result<String, BackendFailure> {
        let key = self.api_key()?;
        let base = self
            .config
            .base_url
            .as_deref()
            .unwrap_or_default()
            .trim_end_matches('/');
        let url = format!("{base}/chat/completions");

        let mut body = json!({
            "model": self.config.model_id,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }

        let mut response = self
            .agent
            .post(&url)
            .header("authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| BackendFailure::Transient(format!("request failed: {e}")))?;

        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(BackendFailure::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let detail = response
                .body_mut()
                .read_to_string()
                .unwrap_or_default();
            return Err(BackendFailure::Fatal(format!(
                "HTTP {status}: {}",
                detail.chars().take(400).collect::<String>()
            )));
        }

        let payload: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendFailure::Fatal(format!("malformed response body: {e}")))?;
        let content = payload
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                BackendFailure::Fatal("response lacks choices[0].message.content".into())
            })?;
        Ok(content.to_string())
    }
}
