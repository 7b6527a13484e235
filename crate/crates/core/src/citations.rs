//! Bracketed source citations such as `[2]` or `[1, 3]`.

use crate::domain::{Citation, CitationSet, Document};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub citations: CitationSet,
    pub warnings: Vec<String>,
}

/// Maps bracketed ordinals in `answer` to the documents presented as
/// `Source 1..n`. Out-of-range ordinals and brackets that are not ordinal
/// lists are dropped with a warning; repeats keep their first position.
pub fn extract_citations(answer: &str, presented: &[&Document]) -> Extraction {
    let mut out = Extraction::default();
    let mut rest = answer;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        let Some(close) = after.find(']') else {
            break;
        };
        let inner = &after[..close];
        rest = &after[close + 1..];

        let parsed: Option<Vec<usize>> = inner
            .split(',')
            .map(|part| {
                let p = part.trim();
                (!p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
                    .then(|| p.parse::<usize>().ok())
                    .flatten()
            })
            .collect();
        let Some(ordinals) = parsed else {
            out.warnings
                .push(format!("ignored unparseable citation [{inner}]"));
            continue;
        };
        for ordinal in ordinals {
            if ordinal == 0 || ordinal > presented.len() {
                out.warnings.push(format!(
                    "citation [{ordinal}] is outside the {} presented source(s)",
                    presented.len()
                ));
                continue;
            }
            if out
                .citations
                .entries
                .iter()
                .any(|c| c.source_ordinal == ordinal)
            {
                continue;
            }
            out.citations.entries.push(Citation {
                source_ordinal: ordinal,
                document_id: presented[ordinal - 1].id.clone(),
            });
        }
    }
    out
}
