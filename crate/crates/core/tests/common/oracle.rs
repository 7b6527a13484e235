//! Brute-force reference implementations, written without the crate's
//! index structures.

use std::collections::BTreeSet;

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Okapi BM25 by direct counting: for every (document, query term) pair
/// the term and document frequencies are recounted from raw text.
pub fn bm25_rank(
    docs: &[(String, String)],
    query: &str,
    k1: f64,
    b: f64,
    top_k: usize,
) -> Vec<(String, f64)> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<String> = tokens(query).into_iter().collect();
    let mut scored = Vec::new();
    for (i, (id, _)) in docs.iter().enumerate() {
        let dl = tokenized[i].len() as f64;
        let mut score = 0.0;
        for term in &terms {
            let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
            if df == 0.0 {
                continue;
            }
            let tf = tokenized[i].iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if score > 0.0 {
            scored.push((id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_k);
    scored
}

/// Shannon entropy in bits of a discrete distribution.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum()
}
