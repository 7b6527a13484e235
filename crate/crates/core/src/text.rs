//! Tokenization shared by documents, BM25 and usage accounting.

/// Counts tokens for document sizes and for usage when a provider does not
/// report its own counts.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited token count.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Removes every character that is neither alphanumeric nor whitespace.
pub fn strip_punctuation(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect()
}

/// Lowercase, strip punctuation, split on whitespace. No stemming and no
/// stopword removal.
pub fn lexical_terms(text: &str) -> Vec<String> {
    strip_punctuation(&text.to_lowercase())
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_are_lowercased_and_stripped() {
        assert_eq!(
            lexical_terms("The Sky, is RED! (evening)"),
            vec!["the", "sky", "is", "red", "evening"]
        );
        assert_eq!(lexical_terms("U.S. don't"), vec!["us", "dont"]);
        assert!(lexical_terms(" ... ").is_empty());
    }

    #[test]
    fn whitespace_count() {
        assert_eq!(WhitespaceTokenizer.count("  a b\tc\n"), 3);
        assert_eq!(WhitespaceTokenizer.count(""), 0);
    }
}
