use std::sync::Arc;

use super::{ChatProvider, ChatRequest, ProviderError, ProviderUsage};
use crate::text::lexical_terms;

pub const EMBED_TEMPLATE: &str = "embed";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embedded {
    pub vectors: Vec<Vec<f64>>,
    pub usage: ProviderUsage,
}

pub trait Embedder: Send + Sync {
    /// One vector per input text, all of the same dimension.
    fn embed(&self, texts: &[String]) -> Result<Embedded, ProviderError>;

    fn id(&self) -> &str;
}

/// Signed feature hashing over lexical terms, L2-normalised.
///
/// Local and dependency-free; gives lexical-overlap similarity, which is
/// enough for offline runs and fixtures.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        let dim = dim.max(1);
        Self {
            dim,
            id: format!("hashing-{dim}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for term in lexical_terms(text) {
            let h = fnv1a(term.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Embedded, ProviderError> {
        Ok(Embedded {
            vectors: texts.iter().map(|t| self.embed_one(t)).collect(),
            usage: ProviderUsage::default(),
        })
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Embeddings fetched through the common chat contract: template `embed`,
/// the text as prompt, and a JSON array of numbers as the reply.
pub struct ProviderEmbedder {
    provider: Arc<dyn ChatProvider>,
}

impl ProviderEmbedder {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self { provider }
    }
}

impl Embedder for ProviderEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Embedded, ProviderError> {
        let mut out = Embedded::default();
        for text in texts {
            let reply = self
                .provider
                .chat(&ChatRequest::new(EMBED_TEMPLATE, text.clone()))?;
            let vector: Vec<f64> =
                serde_json::from_str(reply.text.trim()).map_err(|e| ProviderError::Malformed {
                    provider: self.provider.id().to_owned(),
                    message: format!("embedding is not a number array: {e}"),
                })?;
            if let Some(first) = out.vectors.first() {
                if first.len() != vector.len() {
                    return Err(ProviderError::Dimension {
                        expected: first.len(),
                        found: vector.len(),
                    });
                }
            }
            out.usage.add(&reply.usage);
            out.vectors.push(vector);
        }
        Ok(out)
    }

    fn id(&self) -> &str {
        self.provider.id()
    }
}
