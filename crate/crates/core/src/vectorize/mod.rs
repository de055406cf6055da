//! Token sequences to model inputs: a document-frequency-capped vocabulary,
//! TF-IDF rows for the linear models, and fixed-length index sequences with
//! pretrained-embedding lookup for the neural models.

mod embedding;
mod tfidf;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::TokenSequence;

pub use embedding::{
    embed_sequence, load_embeddings, load_embeddings_filtered, parse_embeddings, EmbeddingMatrix,
    EmbeddingTable,
};
pub use tfidf::{tfidf_transform, TfidfModel};

pub const DEFAULT_MAX_FEATURES: usize = 13_000;
pub const DEFAULT_SEQUENCE_LENGTH: usize = 300;

/// Reserved sequence index for padding.
pub const PAD_INDEX: u32 = 0;
/// Reserved sequence index for tokens outside the vocabulary.
pub const UNKNOWN_INDEX: u32 = 1;
/// Vocabulary index `i` is encoded as sequence index `i + RESERVED_INDICES`.
pub const RESERVED_INDICES: u32 = 2;

/// Tokens ranked by document frequency (descending, ties by token order),
/// truncated to `max_features`. Index `i` is the i-th ranked token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRecord", into = "VocabularyRecord")]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
    max_features: usize,
    token_to_index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRecord {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
    max_features: usize,
}

impl From<VocabularyRecord> for Vocabulary {
    fn from(r: VocabularyRecord) -> Self {
        Vocabulary::from_parts(r.tokens, r.doc_freq, r.max_features)
    }
}

impl From<Vocabulary> for VocabularyRecord {
    fn from(v: Vocabulary) -> Self {
        VocabularyRecord {
            tokens: v.tokens,
            doc_freq: v.doc_freq,
            max_features: v.max_features,
        }
    }
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, doc_freq: Vec<u32>, max_features: usize) -> Self {
        let token_to_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            doc_freq,
            max_features,
            token_to_index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).map(|&i| i as usize)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, token: &str) -> Option<u32> {
        self.index_of(token).map(|i| self.doc_freq[i])
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }

    /// Re-applies the selection rule with a (smaller) cap.
    pub fn recap(&self, max_features: usize) -> Vocabulary {
        let n = self.tokens.len().min(max_features);
        Vocabulary::from_parts(
            self.tokens[..n].to_vec(),
            self.doc_freq[..n].to_vec(),
            max_features,
        )
    }
}

pub fn build_vocabulary(docs: &[TokenSequence], max_features: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::InvalidConfig("cannot build a vocabulary from zero documents".into()));
    }
    let mut df: HashMap<&str, u32> = HashMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u32)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_features);
    let (tokens, doc_freq) = ranked.into_iter().map(|(t, d)| (t.to_string(), d)).unzip();
    Ok(Vocabulary::from_parts(tokens, doc_freq, max_features))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceEncoding {
    pub indices: Vec<u32>,
}

impl SequenceEncoding {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// True for positions that hold a token (known or unknown).
    pub fn active_mask(&self) -> Vec<bool> {
        self.indices.iter().map(|&i| i != PAD_INDEX).collect()
    }
}

/// Head-truncates to `sequence_length` and pads at the tail.
pub fn encode_sequence(tokens: &TokenSequence, vocab: &Vocabulary, sequence_length: usize) -> SequenceEncoding {
    let mut indices: Vec<u32> = tokens
        .iter()
        .take(sequence_length)
        .map(|t| {
            vocab
                .index_of(t)
                .map_or(UNKNOWN_INDEX, |i| i as u32 + RESERVED_INDICES)
        })
        .collect();
    indices.resize(sequence_length, PAD_INDEX);
    SequenceEncoding { indices }
}
