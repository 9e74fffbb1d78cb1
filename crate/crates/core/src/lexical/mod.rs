//! Lexical and dense similarity: the first-stage retriever and the
//! similarity sources used to build corpus graphs.

mod dense;
mod index;

pub(crate) use dense::dot as dense_dot;
pub use dense::DenseVectors;
pub use index::{read_corpus_tsv, Bm25Params, Hit, InvertedIndex};

/// Lowercases `text` and splits it on every non-alphanumeric character.
/// No stemming, no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::tokenize;

    #[test]
    fn splits_and_folds() {
        assert_eq!(
            tokenize("The Flea's life-cycle"),
            ["the", "flea", "s", "life", "cycle"]
        );
        assert!(tokenize("").is_empty());
        assert!(tokenize(" -- !! ").is_empty());
        assert_eq!(tokenize("BM25 BM25"), ["bm25", "bm25"]);
    }

    #[test]
    fn non_ascii_letters_are_kept() {
        assert_eq!(tokenize("Naïve café·Ünïcode"), ["naïve", "café", "ünïcode"]);
    }
}
