use std::collections::BTreeSet;

use super::{finish_ranking, CorpusIndex, RankedDocument, RetrievalConfig};
use crate::domain::Question;
use crate::text::lexical_terms;

/// `ln(1 + (N − n + 0.5) / (n + 0.5))`; never negative.
pub fn bm25_idf(n_docs: usize, doc_freq: usize) -> f64 {
    let n = n_docs as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Okapi BM25 over the distinct query terms. Only documents with a
/// positive score are returned.
pub fn sparse_retrieve<'a>(
    question: &Question,
    index: &'a CorpusIndex,
    config: &RetrievalConfig,
) -> Vec<RankedDocument<'a>> {
    let terms: BTreeSet<String> = lexical_terms(&question.text).into_iter().collect();
    let n_docs = index.len();
    let weighted: Vec<(&str, f64)> = terms
        .iter()
        .filter_map(|t| {
            let df = index.document_frequency(t);
            (df > 0).then(|| (t.as_str(), bm25_idf(n_docs, df)))
        })
        .collect();
    if weighted.is_empty() {
        return Vec::new();
    }
    let k1 = config.bm25_k1;
    let b = config.bm25_b;
    let hits = index
        .documents
        .iter()
        .enumerate()
        .filter_map(|(i, doc)| {
            let tfs = &index.doc_term_frequencies[i];
            let norm = k1 * (1.0 - b + b * index.doc_lengths[i] as f64 / index.avg_doc_len);
            let score: f64 = weighted
                .iter()
                .filter_map(|(t, idf)| {
                    tfs.get(*t).map(|&tf| {
                        let tf = tf as f64;
                        idf * tf * (k1 + 1.0) / (tf + norm)
                    })
                })
                .sum();
            (score > 0.0).then_some(RankedDocument {
                document: doc,
                score,
            })
        })
        .collect();
    finish_ranking(hits, config.top_k)
}
