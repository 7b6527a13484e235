use super::{finish_ranking, CorpusIndex, RankedDocument, RetrievalConfig, RetrievalError};
use crate::domain::Question;
use crate::providers::{Embedder, Transcript};

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn rank_by_vector<'a>(
    query: &[f64],
    index: &'a CorpusIndex,
    config: &RetrievalConfig,
) -> Result<Vec<RankedDocument<'a>>, RetrievalError> {
    let vectors = index
        .dense_vectors
        .as_ref()
        .ok_or(RetrievalError::MissingVectors)?;
    if let Some(first) = vectors.first() {
        if first.len() != query.len() {
            return Err(RetrievalError::Dimension {
                expected: first.len(),
                found: query.len(),
            });
        }
    }
    let hits = index
        .documents
        .iter()
        .zip(vectors)
        .map(|(document, v)| RankedDocument {
            document,
            score: cosine(query, v),
        })
        .collect();
    Ok(finish_ranking(hits, config.top_k))
}

/// Embeds the question text and ranks documents by cosine similarity.
pub fn dense_retrieve<'a>(
    question: &Question,
    index: &'a CorpusIndex,
    embedder: &dyn Embedder,
    config: &RetrievalConfig,
    transcript: &mut Transcript,
) -> Result<Vec<RankedDocument<'a>>, RetrievalError> {
    if index.dense_vectors.is_none() {
        return Err(RetrievalError::MissingVectors);
    }
    let mut embedded = transcript.embed(embedder, std::slice::from_ref(&question.text))?;
    let query = embedded.vectors.pop().unwrap_or_default();
    rank_by_vector(&query, index, config)
}
