//! Contracts for every model-backed capability.
//!
//! All remote capabilities share one request/response shape: a
//! [`ChatRequest`] carrying a template id and a fully rendered prompt, and a
//! [`ChatReply`] carrying text plus [`ProviderUsage`]. Embeddings, remote
//! hop prediction and external annotation are thin adapters over the same
//! contract, which is what lets a single fingerprinted [`ReplayProvider`]
//! stand in for all of them.

mod embed;
mod http;
mod replay;
mod transcript;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::{Tokenizer, WhitespaceTokenizer};

pub use embed::{Embedded, Embedder, HashingEmbedder, ProviderEmbedder};
pub use http::{HttpConfig, HttpProvider};
pub use replay::{RecordSink, RecordingProvider, ReplayEntry, ReplayLog, ReplayProvider};
pub use transcript::{CallKind, Transcript, TranscriptEvent};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("{provider}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("{provider}: endpoint returned status {status}: {body}")]
    Status {
        provider: String,
        status: u16,
        body: String,
    },
    #[error("unrecorded request {fingerprint} (template {template_id})")]
    UnrecordedRequest {
        fingerprint: String,
        template_id: String,
    },
    #[error("{provider}: malformed response: {message}")]
    Malformed { provider: String, message: String },
    #[error("could not parse {what} from reply {reply:?}")]
    Parse { what: &'static str, reply: String },
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: String,
    pub filled_prompt: String,
    #[serde(default)]
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(template_id: impl Into<String>, filled_prompt: impl Into<String>) -> Self {
        Self {
            template_id: template_id.into(),
            filled_prompt: filled_prompt.into(),
            temperature: 0.0,
        }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.template_id, &self.filled_prompt)
    }
}

/// SHA-256 over the template id and the rendered prompt, hex encoded.
pub fn fingerprint(template_id: &str, filled_prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(filled_prompt.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_seconds: f64,
}

impl ProviderUsage {
    /// Usage estimated with the whitespace tokenizer, for providers that do
    /// not report counts.
    pub fn estimate(prompt: &str, completion: &str, latency_seconds: f64) -> Self {
        Self {
            prompt_tokens: WhitespaceTokenizer.count(prompt) as u64,
            completion_tokens: WhitespaceTokenizer.count(completion) as u64,
            latency_seconds,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn add(&mut self, other: &ProviderUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.latency_seconds += other.latency_seconds;
    }
}

impl std::iter::Sum for ProviderUsage {
    fn sum<I: Iterator<Item = ProviderUsage>>(iter: I) -> Self {
        let mut total = ProviderUsage::default();
        for u in iter {
            total.add(&u);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub usage: ProviderUsage,
}

pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError>;

    /// Identifier recorded in reports.
    fn id(&self) -> &str;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        (**self).chat(request)
    }
    fn id(&self) -> &str {
        (**self).id()
    }
}

/// Provider backed by a closure. Used for scripted episodes and for
/// recording fixtures.
pub struct FnProvider<F> {
    id: String,
    respond: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, respond: F) -> Self {
        Self {
            id: id.into(),
            respond,
        }
    }
}

impl<F> ChatProvider for FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let text = (self.respond)(request)?;
        let usage = ProviderUsage::estimate(&request.filled_prompt, &text, 0.0);
        Ok(ChatReply { text, usage })
    }

    fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributionVerdict {
    Contradictory,
    Extrapolatory,
    Attributable,
}

impl AttributionVerdict {
    pub fn parse(reply: &str) -> Result<Self, ProviderError> {
        let label = reply
            .trim()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        match label.as_str() {
            "contradictory" => Ok(Self::Contradictory),
            "extrapolatory" => Ok(Self::Extrapolatory),
            "attributable" => Ok(Self::Attributable),
            _ => Err(ProviderError::Parse {
                what: "attribution label",
                reply: reply.to_owned(),
            }),
        }
    }
}

impl fmt::Display for AttributionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Contradictory => "Contradictory",
            Self::Extrapolatory => "Extrapolatory",
            Self::Attributable => "Attributable",
        };
        f.write_str(s)
    }
}

/// Parses a judge reply as a real score clamped to `[0, 1]`.
pub fn parse_accuracy(reply: &str) -> Result<f64, ProviderError> {
    let cleaned = reply.trim().trim_end_matches('.');
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v.clamp(0.0, 1.0)),
        _ => Err(ProviderError::Parse {
            what: "accuracy score",
            reply: reply.to_owned(),
        }),
    }
}
