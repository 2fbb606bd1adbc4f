//! HTTP text-generation backend.
//!
//! Request: `POST <url>` with JSON `{"model_id", "prompt", "max_tokens",
//! "temperature"}` and, when a token is configured, `Authorization: Bearer
//! <token>`. Response: JSON `{"text": ...}`. Each attempt is bounded by
//! `timeout`; a failed attempt (transport error or non-2xx status) is
//! retried once after `backoff`, and the delay doubles for any further
//! retries configured.

use std::time::Duration;

use kdisc_core::qa::{BackendError, GenParams, GenerationBackend};
use serde::{Deserialize, Serialize};

pub const URL_ENV: &str = "KDISC_GEN_URL";
pub const TOKEN_ENV: &str = "KDISC_GEN_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    1
}

fn default_backoff_ms() -> u64 {
    500
}

impl HttpBackendConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }

    /// Reads the endpoint URL and optional token from the environment.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(URL_ENV).ok().filter(|u| !u.is_empty())?;
        let mut cfg = Self::new(url);
        cfg.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Some(cfg)
    }
}

#[derive(Serialize)]
struct GenRequest<'a> {
    model_id: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenResponse {
    text: String,
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn attempt(&self, body: &str) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.config.url).header("Content-Type", "application/json");
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| BackendError(format!("request failed: {e}")))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError(format!("reading response: {e}")))?;
        if !status.is_success() {
            return Err(BackendError(format!("endpoint returned {status}: {text}")));
        }
        let parsed: GenResponse =
            serde_json::from_str(&text).map_err(|e| BackendError(format!("response is not {{\"text\": ...}}: {e}")))?;
        Ok(parsed.text)
    }
}

impl GenerationBackend for HttpBackend {
    fn backend_id(&self) -> String {
        format!("http:{}", self.config.url)
    }

    fn generate(&self, model_id: &str, prompt: &str, params: &GenParams) -> Result<String, BackendError> {
        let body = serde_json::to_string(&GenRequest {
            model_id,
            prompt,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
        })
        .map_err(|e| BackendError(e.to_string()))?;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| BackendError("no attempt made".into())))
    }
}
