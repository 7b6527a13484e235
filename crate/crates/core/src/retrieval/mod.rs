//! Document store with a sparse BM25 ranker and a dense cosine ranker.
//!
//! Both rankers return at most `top_k` documents sorted by non-increasing
//! score, ties broken by ascending document id.

mod bm25;
mod dense;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Document;
use crate::providers::{Embedder, ProviderError};
use crate::text::{lexical_terms, WhitespaceTokenizer};

pub use bm25::{bm25_idf, sparse_retrieve};
pub use dense::{cosine, dense_retrieve, rank_by_vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("duplicate document id {0}")]
    DuplicateId(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("index has no dense vectors")]
    MissingVectors,
    #[error("query vector has dimension {found}, index has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            bm25_k1: 1.5,
            bm25_b: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDocument<'a> {
    pub document: &'a Document,
    pub score: f64,
}

/// Immutable corpus index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub documents: Vec<Document>,
    /// Document frequency per term.
    pub term_stats: BTreeMap<String, usize>,
    pub doc_term_frequencies: Vec<BTreeMap<String, usize>>,
    /// Lexical term count per document.
    pub doc_lengths: Vec<usize>,
    pub avg_doc_len: f64,
    pub dense_vectors: Option<Vec<Vec<f64>>>,
    pub embedder_id: Option<String>,
}

#[derive(Deserialize)]
struct CorpusLine {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Reads a JSONL corpus of `{id, title, text}` records.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, RetrievalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
    parse_corpus(&text)
}

pub fn parse_corpus(input: &str) -> Result<Vec<Document>, RetrievalError> {
    let mut docs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusLine = serde_json::from_str(line).map_err(|e| RetrievalError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(Document::new(
            rec.id,
            rec.title,
            rec.text,
            &WhitespaceTokenizer,
        ));
    }
    Ok(docs)
}

impl CorpusIndex {
    /// Computes term statistics and, when an embedder is given, one dense
    /// vector per document over its indexed text.
    pub fn build(
        documents: Vec<Document>,
        embedder: Option<&dyn Embedder>,
    ) -> Result<Self, RetrievalError> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(RetrievalError::DuplicateId(d.id.clone()));
            }
        }
        let mut term_stats: BTreeMap<String, usize> = BTreeMap::new();
        let mut doc_term_frequencies = Vec::with_capacity(documents.len());
        let mut doc_lengths = Vec::with_capacity(documents.len());
        for d in &documents {
            let terms = lexical_terms(&d.indexed_text());
            doc_lengths.push(terms.len());
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            for t in tf.keys() {
                *term_stats.entry(t.clone()).or_default() += 1;
            }
            doc_term_frequencies.push(tf);
        }
        let avg_doc_len = if documents.is_empty() {
            0.0
        } else {
            doc_lengths.iter().sum::<usize>() as f64 / documents.len() as f64
        };
        let (dense_vectors, embedder_id) = match embedder {
            Some(e) => {
                let texts: Vec<String> = documents.iter().map(Document::indexed_text).collect();
                let embedded = e.embed(&texts)?;
                if embedded.vectors.len() != documents.len() {
                    return Err(RetrievalError::Provider(ProviderError::Malformed {
                        provider: e.id().to_owned(),
                        message: format!(
                            "{} vectors for {} documents",
                            embedded.vectors.len(),
                            documents.len()
                        ),
                    }));
                }
                (Some(embedded.vectors), Some(e.id().to_owned()))
            }
            None => (None, None),
        };
        Ok(Self {
            documents,
            term_stats,
            doc_term_frequencies,
            doc_lengths,
            avg_doc_len,
            dense_vectors,
            embedder_id,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.term_stats.get(term).copied().unwrap_or(0)
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).expect("index json");
        std::fs::write(path, json)
            .map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))
    }
}

/// Sorts by score descending, then id ascending, and truncates.
fn finish_ranking(mut hits: Vec<RankedDocument<'_>>, top_k: usize) -> Vec<RankedDocument<'_>> {
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.document.id.cmp(&b.document.id))
    });
    hits.truncate(top_k);
    hits
}
