//! Comment preprocessing: special-character stripping, tokenization,
//! lowercasing, censored-word masking, stopword removal and optional
//! stemming.
//!
//! The pipeline order is strip -> tokenize -> lowercase -> mask -> stopwords
//! -> stem. Masking runs after tokenization so that `s**t!!` becomes a single
//! `beep` token rather than fragments.

mod porter;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::porter_stem;

/// Replacement token for words censored with `*`.
pub const MASK_TOKEN: &str = "beep";

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// Parses the one-token-per-line format; `#` starts a comment line.
    /// Entries are lowercased and blank lines skipped.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopwordList { words }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn empty() -> Self {
        StopwordList {
            words: BTreeSet::new(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub keep_asterisk_masking: bool,
    pub lowercase: bool,
    pub stopwords: StopwordList,
    pub enable_stemming: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            keep_asterisk_masking: true,
            lowercase: true,
            stopwords: StopwordList::default(),
            enable_stemming: false,
        }
    }
}

/// Ordered, whitespace-free, nonempty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Empty strings are dropped; tokens must not contain whitespace.
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.chars().any(char::is_whitespace)));
        TokenSequence(tokens.into_iter().filter(|t| !t.is_empty()).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence::new(iter.into_iter().map(Into::into).collect())
    }
}

/// Keeps letters and `*`; every other character becomes a space, then
/// space runs are collapsed and the ends trimmed.
pub fn strip_specials(text: &str) -> String {
    strip_with(text, true)
}

fn strip_with(text: &str, keep_asterisk: bool) -> String {
    let mapped: String = text
        .chars()
        .map(|c| {
            if c.is_alphabetic() || (keep_asterisk && c == '*') {
                c
            } else {
                ' '
            }
        })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace().collect()
}

/// Lowercases each token. Characters whose lowercase form is not a letter
/// (for example combining marks produced by some capitals) are dropped.
pub fn lowercase(tokens: TokenSequence) -> TokenSequence {
    tokens
        .into_inner()
        .into_iter()
        .map(|t| {
            t.chars()
                .flat_map(char::to_lowercase)
                .filter(|c| (c.is_alphabetic() && !c.is_uppercase()) || *c == '*')
                .collect::<String>()
        })
        .collect()
}

pub fn mask_censored(tokens: TokenSequence) -> TokenSequence {
    TokenSequence(
        tokens
            .into_inner()
            .into_iter()
            .map(|t| if t.contains('*') { MASK_TOKEN.to_string() } else { t })
            .collect(),
    )
}

pub fn remove_stopwords(tokens: TokenSequence, config: &PreprocessConfig) -> TokenSequence {
    TokenSequence(
        tokens
            .into_inner()
            .into_iter()
            .filter(|t| !config.stopwords.contains(t))
            .collect(),
    )
}

pub fn stem(tokens: TokenSequence) -> TokenSequence {
    tokens.iter().map(porter_stem).collect()
}

pub fn preprocess_pipeline(text: &str, config: &PreprocessConfig) -> TokenSequence {
    let stripped = strip_with(text, config.keep_asterisk_masking);
    let mut tokens = tokenize(&stripped);
    if config.lowercase {
        tokens = lowercase(tokens);
    }
    if config.keep_asterisk_masking {
        tokens = mask_censored(tokens);
    }
    tokens = remove_stopwords(tokens, config);
    if config.enable_stemming {
        tokens = stem(tokens);
    }
    tokens
}

pub fn preprocess_all<S: AsRef<str> + Sync>(texts: &[S], config: &PreprocessConfig) -> Vec<TokenSequence> {
    use rayon::prelude::*;
    texts
        .par_iter()
        .map(|t| preprocess_pipeline(t.as_ref(), config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> TokenSequence {
        words.iter().copied().collect()
    }

    #[test]
    fn strip_examples() {
        assert_eq!(strip_specials("Rest in pieces. fk u"), "Rest in pieces fk u");
        assert_eq!(strip_specials("abc"), "abc");
        assert_eq!(strip_specials("s**t!! #1"), "s**t");
        assert_eq!(strip_specials("don't"), "don t");
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_censored(toks(&["s**t"])), toks(&["beep"]));
        assert_eq!(mask_censored(toks(&["hope"])), toks(&["hope"]));
        assert_eq!(
            mask_censored(toks(&["f***", "you", "**"])),
            toks(&["beep", "you", "beep"])
        );
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("We can only hope"), toks(&["We", "can", "only", "hope"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b\tc"), toks(&["a", "b", "c"]));
    }

    #[test]
    fn stopword_examples() {
        let cfg = PreprocessConfig::default();
        for w in ["the", "in", "a", "an"] {
            assert!(cfg.stopwords.contains(w), "{w}");
        }
        assert_eq!(
            remove_stopwords(toks(&["the", "game", "in", "a", "mess"]), &cfg),
            toks(&["game", "mess"])
        );
        assert!(remove_stopwords(toks(&[]), &cfg).is_empty());
        assert!(remove_stopwords(toks(&["an", "an"]), &cfg).is_empty());
    }

    #[test]
    fn default_list_is_lowercase_and_sized() {
        let list = StopwordList::default();
        assert!((140..=160).contains(&list.len()), "{}", list.len());
        assert!(list.iter().all(|w| !w.is_empty() && w.to_lowercase() == w));
    }

    #[test]
    fn stopword_file_format() {
        let list = StopwordList::parse("# comment\nThe\n\n  of \n#x\n");
        assert_eq!(list.iter().collect::<Vec<_>>(), vec!["of", "the"]);
    }

    #[test]
    fn stem_examples() {
        assert_eq!(stem(toks(&["previous"])), toks(&["previou"]));
        assert_eq!(stem(toks(&["minutes"])), toks(&["minut"]));
        assert_eq!(stem(toks(&["run"])), toks(&["run"]));
    }

    #[test]
    fn pipeline_on_table_one_text() {
        let cfg = PreprocessConfig::default();
        let out = preprocess_pipeline("This is why we don't account share children.", &cfg);
        // "this is why we don t account share children" minus stopwords.
        assert_eq!(out, toks(&["account", "share", "children"]));

        let keep_all = PreprocessConfig {
            stopwords: StopwordList::empty(),
            ..PreprocessConfig::default()
        };
        assert_eq!(
            preprocess_pipeline("This is why we don't account share children.", &keep_all),
            toks(&["this", "is", "why", "we", "don", "t", "account", "share", "children"])
        );
    }

    #[test]
    fn pipeline_masks_and_handles_empty() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess_pipeline("***", &cfg), toks(&["beep"]));
        assert_eq!(preprocess_pipeline("s**t!! #1", &cfg), toks(&["beep"]));
        assert!(preprocess_pipeline("", &cfg).is_empty());
    }

    #[test]
    fn pipeline_with_stemming() {
        let cfg = PreprocessConfig {
            enable_stemming: true,
            ..PreprocessConfig::default()
        };
        assert_eq!(
            preprocess_pipeline("Two extra minutes, the previous post!", &cfg),
            toks(&["two", "extra", "minut", "previou", "post"])
        );
    }

    #[test]
    fn masking_off_strips_asterisks() {
        let cfg = PreprocessConfig {
            keep_asterisk_masking: false,
            stopwords: StopwordList::empty(),
            ..PreprocessConfig::default()
        };
        assert_eq!(preprocess_pipeline("s**t", &cfg), toks(&["s", "t"]));
    }

    proptest! {
        #[test]
        fn pipeline_is_idempotent(text in "[a-zA-Z*!.,' \tÉéßİ0-9]{0,60}") {
            let cfg = PreprocessConfig::default();
            let once = preprocess_pipeline(&text, &cfg);
            let twice = preprocess_pipeline(&once.join(), &cfg);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn output_is_lowercase_letters(text in "\\PC{0,60}") {
            let out = preprocess_pipeline(&text, &PreprocessConfig::default());
            for t in out.iter() {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()), "{:?}", t);
            }
        }

        #[test]
        fn strip_alphabet(text in "\\PC{0,60}") {
            let s = strip_specials(&text);
            prop_assert!(s.chars().all(|c| c.is_alphabetic() || c == ' ' || c == '*'));
            prop_assert!(!s.contains("  "));
            prop_assert_eq!(s.trim(), s.as_str());
        }

        #[test]
        fn mask_preserves_length(words in proptest::collection::vec("[a-z*]{1,6}", 0..20)) {
            let seq: TokenSequence = words.iter().map(String::as_str).collect();
            prop_assert_eq!(mask_censored(seq.clone()).len(), seq.len());
        }
    }
}
