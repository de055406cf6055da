use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SequenceEncoding, Vocabulary, RESERVED_INDICES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pretrained word vectors in the word-per-line text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    source_name: String,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source_name: impl Into<String>) -> Self {
        EmbeddingTable {
            dim,
            source_name: source_name.into(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Inserts a vector; an existing token keeps its first vector.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "embedding vector",
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Vector for `token`, or the zero vector when absent.
    pub fn lookup(&self, token: &str) -> Vec<f64> {
        self.get(token).map_or_else(|| vec![0.0; self.dim], <[f64]>::to_vec)
    }

    /// Multiplies every stored vector by `c`.
    pub fn scaled(&self, c: f64) -> EmbeddingTable {
        EmbeddingTable {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: usize) -> Result<EmbeddingTable> {
    load_embeddings_filtered(path, expected_dim, None)
}

/// Loads only tokens contained in `keep` when given; large pretrained
/// files are mostly irrelevant to a single corpus.
pub fn load_embeddings_filtered(
    path: impl AsRef<Path>,
    expected_dim: usize,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "embeddings".to_string(), |s| s.to_string_lossy().into_owned());
    parse_embeddings(file, path, &name, expected_dim, keep)
}

pub fn parse_embeddings<R: Read>(
    reader: R,
    origin: &Path,
    source_name: &str,
    expected_dim: usize,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(expected_dim, source_name);
    let mut values = Vec::with_capacity(expected_dim);
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(token) = fields.next() else { continue };
        if line_no == 1 && is_count_header(line, expected_dim) {
            continue;
        }
        if keep.is_some_and(|k| !k.contains(token)) {
            continue;
        }
        values.clear();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::EmbeddingParse {
                line: line_no,
                token: f.to_string(),
            })?;
            values.push(v);
        }
        if values.len() != expected_dim {
            return Err(Error::EmbeddingDimension {
                line: line_no,
                expected: expected_dim,
                found: values.len(),
            });
        }
        table.insert(token, &values)?;
    }
    Ok(table)
}

/// `count dim` first lines as written by word2vec-style tools.
fn is_count_header(line: &str, expected_dim: usize) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2
        && fields[0].parse::<u64>().is_ok()
        && fields[1].parse::<usize>().ok() == Some(expected_dim)
}

/// Embedding rows aligned with sequence indices: rows 0 (pad) and 1
/// (unknown) are zero, row `i + 2` is the vector of vocabulary token `i`
/// (zero when the table lacks it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub source_name: String,
    pub rows: Matrix,
}

impl EmbeddingMatrix {
    pub fn build(vocab: &Vocabulary, table: &EmbeddingTable) -> Self {
        let dim = table.dim();
        let mut rows = Matrix::zeros(vocab.len() + RESERVED_INDICES as usize, dim);
        for (i, token) in vocab.tokens().iter().enumerate() {
            if let Some(v) = table.get(token) {
                rows.row_mut(i + RESERVED_INDICES as usize).copy_from_slice(v);
            }
        }
        EmbeddingMatrix {
            source_name: table.source_name().to_string(),
            rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn embed(&self, encoding: &SequenceEncoding) -> Matrix {
        let dim = self.dim();
        let mut data = Vec::with_capacity(encoding.len() * dim);
        for &i in &encoding.indices {
            data.extend_from_slice(self.rows.row(i as usize));
        }
        Matrix::from_vec(encoding.len(), dim, data).expect("consistent shape")
    }
}

/// Row `i` is the embedding of the token at position `i`; padding and
/// unknown positions are zero rows.
pub fn embed_sequence(encoding: &SequenceEncoding, vocab: &Vocabulary, table: &EmbeddingTable) -> Matrix {
    let dim = table.dim();
    let mut out = Matrix::zeros(encoding.len(), dim);
    for (pos, &idx) in encoding.indices.iter().enumerate() {
        if idx >= RESERVED_INDICES {
            if let Some(v) = table.get(vocab.token((idx - RESERVED_INDICES) as usize)) {
                out.row_mut(pos).copy_from_slice(v);
            }
        }
    }
    out
}
