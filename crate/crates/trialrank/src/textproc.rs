//! Shared lexical pipeline: tokenization, stopword removal, stemming.
//!
//! The same pipeline runs at index time and query time so that document
//! and query terms land in the same term space.

use std::collections::HashSet;
use std::io;
use std::path::Path;

use crate::porter;

/// Ordered list of lowercase word tokens.
pub type TokenStream = Vec<String>;

/// Lowercases and splits on any non-alphanumeric character. Digits are
/// kept as tokens; empty fragments are dropped.
pub fn tokenize(text: &str) -> TokenStream {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// English stopword list, loaded once and read-only afterwards.
#[derive(Debug, Clone)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    /// The bundled SMART-style English list.
    pub fn default_english() -> Self {
        Self::from_words(include_str!("../fixtures/stopwords.txt").lines())
    }

    /// Loads a stoplist file: one lowercase word per line, UTF-8.
    pub fn from_file(path: &Path) -> io::Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Ok(Self::from_words(content.lines()))
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            words: words
                .into_iter()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Removes stoplist members, preserving order.
pub fn remove_stopwords(tokens: TokenStream, stoplist: &Stoplist) -> TokenStream {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Porter (1980) stem of a lowercase token.
pub fn stem(token: &str) -> String {
    porter::stem(token)
}

/// tokenize -> remove stopwords -> stem, applied identically to documents
/// and queries.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    stoplist: Stoplist,
}

impl TextPipeline {
    pub fn new(stoplist: Stoplist) -> Self {
        Self { stoplist }
    }

    pub fn default_english() -> Self {
        Self::new(Stoplist::default_english())
    }

    pub fn stoplist(&self) -> &Stoplist {
        &self.stoplist
    }

    /// Full pipeline output: stemmed content tokens.
    pub fn process(&self, text: &str) -> TokenStream {
        self.filtered(text).iter().map(|t| stem(t)).collect()
    }

    /// Tokenized and stopword-filtered, but unstemmed. Keyword extraction
    /// works on these because embeddings need surface forms.
    pub fn filtered(&self, text: &str) -> TokenStream {
        remove_stopwords(tokenize(text), &self.stoplist)
    }
}

impl Default for TextPipeline {
    fn default() -> Self {
        Self::default_english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_non_alphanumeric() {
        assert_eq!(tokenize("Age > 18 years"), vec!["age", "18", "years"]);
        assert_eq!(tokenize("type-2 diabetes"), vec!["type", "2", "diabetes"]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("!!! ---").is_empty());
    }

    #[test]
    fn stopword_removal_preserves_order() {
        let stop = Stoplist::default_english();
        let tokens = tokenize("the patient is diabetic");
        assert_eq!(remove_stopwords(tokens, &stop), vec!["patient", "diabetic"]);
    }

    #[test]
    fn stopword_removal_degenerate_inputs() {
        let stop = Stoplist::default_english();
        assert!(remove_stopwords(vec![], &stop).is_empty());
        let all_stop = tokenize("the of and is");
        assert!(remove_stopwords(all_stop, &stop).is_empty());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let p = TextPipeline::default_english();
        let text = "Patients with Type-2 Diabetes receiving metformin therapy";
        assert_eq!(p.process(text), p.process(text));
    }

    #[test]
    fn pipeline_stems_after_filtering() {
        let p = TextPipeline::default_english();
        assert_eq!(
            p.process("the patient was running daily"),
            vec!["patient", "run", "daili"]
        );
    }

    #[test]
    fn custom_stoplist_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "alpha\nbeta\n").unwrap();
        let stop = Stoplist::from_file(&path).unwrap();
        assert!(stop.contains("alpha"));
        assert!(!stop.contains("gamma"));
        assert_eq!(stop.len(), 2);
    }
}
