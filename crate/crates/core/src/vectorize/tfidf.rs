use serde::{Deserialize, Serialize};

use super::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::{SparseMatrix, SparseRow};
use crate::textprep::TokenSequence;

/// Smoothed TF-IDF: `tf` is the raw count, `idf = ln((1 + N) / (1 + df)) + 1`,
/// rows are L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub corpus_size: usize,
}

impl TfidfModel {
    pub fn fit(docs: &[TokenSequence], max_features: usize) -> Result<Self> {
        let vocabulary = build_vocabulary(docs, max_features)?;
        Ok(Self::from_vocabulary(vocabulary, docs.len()))
    }

    pub fn from_vocabulary(vocabulary: Vocabulary, corpus_size: usize) -> Self {
        let n = corpus_size as f64;
        let idf = vocabulary
            .doc_freqs()
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
        TfidfModel {
            vocabulary,
            idf,
            corpus_size,
        }
    }

    /// Rebuilds a model from stored parts, checking the idf invariant.
    pub fn from_parts(vocabulary: Vocabulary, idf: Vec<f64>, corpus_size: usize) -> Result<Self> {
        if idf.len() != vocabulary.len() {
            return Err(Error::DimensionMismatch {
                context: "idf weights vs vocabulary",
                expected: vocabulary.len(),
                found: idf.len(),
            });
        }
        if idf.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidConfig("idf weights must be finite and positive".into()));
        }
        Ok(TfidfModel {
            vocabulary,
            idf,
            corpus_size,
        })
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn transform_one(&self, doc: &TokenSequence) -> SparseRow {
        let mut counts: Vec<(u32, f64)> = doc
            .iter()
            .filter_map(|t| self.vocabulary.index_of(t))
            .map(|i| (i as u32, 1.0))
            .collect();
        counts.sort_unstable_by_key(|p| p.0);
        let mut row = SparseRow::default();
        for (i, c) in counts {
            if row.indices.last() == Some(&i) {
                *row.values.last_mut().unwrap() += c;
            } else {
                row.indices.push(i);
                row.values.push(c);
            }
        }
        for (i, v) in row.indices.iter().zip(row.values.iter_mut()) {
            *v *= self.idf[*i as usize];
        }
        let norm = row.norm();
        if norm > 0.0 {
            row.values.iter_mut().for_each(|v| *v /= norm);
        }
        row
    }
}

pub fn tfidf_transform(docs: &[TokenSequence], model: &TfidfModel) -> SparseMatrix {
    use rayon::prelude::*;
    SparseMatrix::new(
        model.dim(),
        docs.par_iter().map(|d| model.transform_one(d)).collect(),
    )
}
