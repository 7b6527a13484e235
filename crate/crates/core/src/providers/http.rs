use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatReply, ChatRequest, ProviderError, ProviderUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub url: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> u64 {
    500
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            timeout_seconds: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    template_id: &'a str,
    prompt: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

/// JSON-over-HTTP provider.
///
/// `POST {template_id, prompt, temperature}` and expects
/// `{text, prompt_tokens, completion_tokens}` back. Connection failures,
/// timeouts, 429 and 5xx are retried with exponential backoff; other
/// statuses fail immediately.
pub struct HttpProvider {
    id: String,
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(id: impl Into<String>, config: HttpConfig) -> Result<Self, ProviderError> {
        let id = id.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_seconds.max(0.001)))
            .build()
            .map_err(|e| ProviderError::Transport {
                provider: id.clone(),
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { id, config, client })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatReply, Attempt> {
        let started = Instant::now();
        let mut builder = self.client.post(&self.config.url).json(&WireRequest {
            template_id: &request.template_id,
            prompt: &request.filled_prompt,
            temperature: request.temperature,
        });
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(Attempt::Fatal(ProviderError::Status {
                provider: self.id.clone(),
                status: status.as_u16(),
                body,
            }));
        }
        let wire: WireResponse = response.json().map_err(|e| {
            Attempt::Fatal(ProviderError::Malformed {
                provider: self.id.clone(),
                message: e.to_string(),
            })
        })?;
        let latency = started.elapsed().as_secs_f64();
        let estimate = ProviderUsage::estimate(&request.filled_prompt, &wire.text, latency);
        let usage = ProviderUsage {
            prompt_tokens: wire.prompt_tokens.unwrap_or(estimate.prompt_tokens),
            completion_tokens: wire.completion_tokens.unwrap_or(estimate.completion_tokens),
            latency_seconds: latency,
        };
        Ok(ChatReply {
            text: wire.text,
            usage,
        })
    }
}

enum Attempt {
    Retry(String),
    Fatal(ProviderError),
}

impl ChatProvider for HttpProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let mut last = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(request) {
                Ok(reply) => return Ok(reply),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    log::warn!("{}: attempt {} failed: {message}", self.id, attempt + 1);
                    last = message;
                }
            }
        }
        Err(ProviderError::Transport {
            provider: self.id.clone(),
            attempts,
            message: last,
        })
    }

    fn id(&self) -> &str {
        &self.id
    }
}
