//! Hop-labelled exemplar cases for conditioning plan generation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::HopLabel;
use crate::planner::parse_plan_with;
use crate::providers::{Embedder, ProviderError};
use crate::retrieval::cosine;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExemplarError {
    #[error("no exemplars")]
    Empty,
    #[error("exemplar {id} (line {line}): {reason}")]
    Malformed {
        line: usize,
        id: String,
        reason: String,
    },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarCase {
    pub id: String,
    pub hop_label: HopLabel,
    pub question_text: String,
    /// Plan in the strict JSON array format; validated at load.
    pub plan_json: String,
}

#[derive(Deserialize)]
struct RawCase {
    id: String,
    hop_label: i64,
    question_text: String,
    plan_json: String,
}

/// Read-only store indexed by hop label; each bucket is sorted by id.
#[derive(Debug, Clone, Default)]
pub struct ExemplarStore {
    buckets: BTreeMap<HopLabel, Vec<ExemplarCase>>,
    embeddings: HashMap<String, Vec<f64>>,
}

impl ExemplarStore {
    pub fn from_cases(cases: Vec<ExemplarCase>) -> Result<Self, ExemplarError> {
        if cases.is_empty() {
            return Err(ExemplarError::Empty);
        }
        let mut buckets: BTreeMap<HopLabel, Vec<ExemplarCase>> = BTreeMap::new();
        for case in cases {
            buckets.entry(case.hop_label).or_default().push(case);
        }
        for bucket in buckets.values_mut() {
            bucket.sort_by(|a, b| a.id.cmp(&b.id));
        }
        Ok(Self {
            buckets,
            embeddings: HashMap::new(),
        })
    }

    pub fn from_jsonl(input: &str) -> Result<Self, ExemplarError> {
        let mut cases = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let raw: RawCase = serde_json::from_str(line).map_err(|e| {
                // Best effort at naming the case even when the record is broken.
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|x| x.as_str()).map(str::to_owned))
                    .unwrap_or_else(|| "?".to_owned());
                ExemplarError::Malformed {
                    line: line_no,
                    id,
                    reason: e.to_string(),
                }
            })?;
            let malformed = |reason: String| ExemplarError::Malformed {
                line: line_no,
                id: raw.id.clone(),
                reason,
            };
            let hop_label = HopLabel::new(raw.hop_label).map_err(|e| malformed(e.to_string()))?;
            parse_plan_with(&raw.plan_json, &raw.id, usize::MAX)
                .map_err(|e| malformed(e.to_string()))?;
            cases.push(ExemplarCase {
                id: raw.id,
                hop_label,
                question_text: raw.question_text,
                plan_json: raw.plan_json,
            });
        }
        Self::from_cases(cases)
    }

    pub fn load(path: &Path) -> Result<Self, ExemplarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExemplarError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Embeds every exemplar question so selection can rank by similarity.
    pub fn embed_with(&mut self, embedder: &dyn Embedder) -> Result<(), ExemplarError> {
        let cases: Vec<&ExemplarCase> = self.buckets.values().flatten().collect();
        let texts: Vec<String> = cases.iter().map(|c| c.question_text.clone()).collect();
        let embedded = embedder.embed(&texts)?;
        self.embeddings = cases
            .iter()
            .map(|c| c.id.clone())
            .zip(embedded.vectors)
            .collect();
        Ok(())
    }

    pub fn set_embeddings(&mut self, embeddings: HashMap<String, Vec<f64>>) {
        self.embeddings = embeddings;
    }

    pub fn has_embeddings(&self) -> bool {
        !self.embeddings.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<HopLabel, usize> {
        HopLabel::all()
            .map(|h| (h, self.buckets.get(&h).map_or(0, Vec::len)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Up to `k` cases, taken from the requested label first and then from
    /// adjacent labels by increasing hop distance (smaller label first on
    /// equal distance). Within a bucket cases are ranked by cosine similarity
    /// to `query_embedding` when both it and stored embeddings exist, and by
    /// id otherwise.
    pub fn select(
        &self,
        hop: HopLabel,
        k: usize,
        query_embedding: Option<&[f64]>,
    ) -> Result<Vec<&ExemplarCase>, ExemplarError> {
        if self.is_empty() {
            return Err(ExemplarError::Empty);
        }
        let mut labels: Vec<HopLabel> = HopLabel::all().collect();
        labels.sort_by_key(|l| ((l.get() as i32 - hop.get() as i32).abs(), l.get()));

        let mut out = Vec::with_capacity(k);
        for label in labels {
            if out.len() >= k {
                break;
            }
            let Some(bucket) = self.buckets.get(&label) else {
                continue;
            };
            let mut ranked: Vec<&ExemplarCase> = bucket.iter().collect();
            if let (Some(q), true) = (query_embedding, self.has_embeddings()) {
                let sim = |c: &ExemplarCase| {
                    self.embeddings
                        .get(&c.id)
                        .map_or(f64::NEG_INFINITY, |v| cosine(q, v))
                };
                ranked.sort_by(|a, b| sim(b).total_cmp(&sim(a)).then_with(|| a.id.cmp(&b.id)));
            }
            out.extend(ranked.into_iter().take(k - out.len()));
        }
        Ok(out)
    }
}
