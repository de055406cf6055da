//! Binary model files.
//!
//! ```text
//! magic        8 bytes   "FGMODEL\0"
//! version      u32 LE    FORMAT_VERSION
//! header_len   u64 LE
//! header       header_len bytes of UTF-8 JSON (see `Header`)
//! count        u32 LE    number of tensors
//! per tensor:
//!   name_len   u32 LE, then name_len bytes of UTF-8
//!   ndim       u32 LE, then ndim u64 LE dimensions
//!   data       product(dims) f64 LE values, row-major
//! ```
//!
//! The header carries the preprocessing and feature settings, the model
//! configuration and the vocabulary. Linear models store `linear.weights`,
//! `linear.bias` and `tfidf.idf`; neural models store their parameters plus
//! `embedding`, the frozen `[vocab + 2, dim]` lookup matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{FeatureSpace, LinearModel};
use crate::matrix::Matrix;
use crate::neural::{GruModel, NeuralNet, Tensor, TextCnnModel};
use crate::pipeline::{FeatureConfig, ModelSpec, TrainedModel, TrainedPipeline};
use crate::textprep::PreprocessConfig;
use crate::util::write_atomic;
use crate::vectorize::{EmbeddingMatrix, TfidfModel, Vocabulary, RESERVED_INDICES};

pub const MAGIC: &[u8; 8] = b"FGMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    /// `logreg`, `svm`, `textcnn` or `gru`.
    pub kind: String,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub model: ModelSpec,
    pub feature_space: FeatureSpace,
    pub vocabulary: Vocabulary,
    /// Training documents behind the IDF weights (linear models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_source: Option<String>,
    pub tensors: Vec<TensorInfo>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Artifact(msg.into())
}

fn tensor_of(values: &[f64]) -> Tensor {
    Tensor::from_vec(&[values.len()], values.to_vec()).expect("1-D shape")
}

fn embedding_tensor(e: &EmbeddingMatrix) -> Tensor {
    Tensor::from_vec(&[e.rows.rows(), e.rows.cols()], e.rows.as_slice().to_vec()).expect("2-D shape")
}

fn neural_tensors<M: NeuralNet>(model: &M, embeddings: &EmbeddingMatrix) -> Vec<(String, Tensor)> {
    let mut out: Vec<_> = model
        .parameters()
        .into_iter()
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    out.push(("embedding".into(), embedding_tensor(embeddings)));
    out
}

pub fn encode_pipeline(p: &TrainedPipeline) -> Result<Vec<u8>> {
    let (model, feature_space, vocabulary, corpus_size, embedding_source, tensors) = match &p.model {
        TrainedModel::Linear { tfidf, model } => (
            ModelSpec::Linear(model.config),
            model.trained_on.clone(),
            tfidf.vocabulary.clone(),
            Some(tfidf.corpus_size),
            None,
            vec![
                ("linear.weights".to_string(), tensor_of(&model.weights)),
                ("linear.bias".to_string(), Tensor::scalar(model.bias)),
                ("tfidf.idf".to_string(), tensor_of(&tfidf.idf)),
            ],
        ),
        TrainedModel::TextCnn {
            vocabulary,
            embeddings,
            model,
        } => (
            ModelSpec::TextCnn(model.config.clone()),
            FeatureSpace {
                kind: "embeddings".into(),
                dim: model.config.embedding_dim,
            },
            vocabulary.clone(),
            None,
            Some(embeddings.source_name.clone()),
            neural_tensors(model, embeddings),
        ),
        TrainedModel::Gru {
            vocabulary,
            embeddings,
            model,
        } => (
            ModelSpec::Gru(model.config.clone()),
            FeatureSpace {
                kind: "embeddings".into(),
                dim: model.config.embedding_dim,
            },
            vocabulary.clone(),
            None,
            Some(embeddings.source_name.clone()),
            neural_tensors(model, embeddings),
        ),
    };
    let header = Header {
        kind: p.model_name().to_string(),
        preprocess: p.preprocess.clone(),
        features: p.features,
        model,
        feature_space,
        vocabulary,
        corpus_size,
        embedding_source,
        tensors: tensors
            .iter()
            .map(|(n, t)| TensorInfo {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_pipeline(path: impl AsRef<Path>, p: &TrainedPipeline) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pipeline(p)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| bad(format!("truncated file while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| bad(format!("{what} does not fit in memory")))
    }
}

pub fn decode_pipeline(bytes: &[u8]) -> Result<TrainedPipeline> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(bad("not a model file (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
    }
    let header_len = r.len("header length")?;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| bad(format!("invalid header: {e}")))?;

    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let name_len = r.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| bad(format!("tensor {i} has a non-UTF-8 name")))?
            .to_string();
        let ndim = r.u32("tensor rank")? as usize;
        let shape = (0..ndim).map(|_| r.len("tensor dimension")).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad(format!("tensor `{name}` is too large")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?, "tensor data")?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("tensor `{name}` holds non-finite values")));
        }
        tensors.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes after the last tensor", bytes.len() - r.pos)));
    }
    let listed: Vec<TensorInfo> = tensors
        .iter()
        .map(|(n, t)| TensorInfo {
            name: n.clone(),
            shape: t.shape().to_vec(),
        })
        .collect();
    if listed != header.tensors {
        return Err(bad("tensor table does not match the header"));
    }
    build_pipeline(header, tensors)
}

fn take(tensors: &mut Vec<(String, Tensor)>, name: &str) -> Result<Tensor> {
    let pos = tensors
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| bad(format!("missing tensor `{name}`")))?;
    Ok(tensors.swap_remove(pos).1)
}

fn embeddings_from(
    tensors: &mut Vec<(String, Tensor)>,
    header: &Header,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    let t = take(tensors, "embedding")?;
    let rows = header.vocabulary.len() + RESERVED_INDICES as usize;
    if t.shape() != [rows, dim] {
        return Err(bad(format!(
            "embedding has shape {:?}, expected [{rows}, {dim}] for the stored vocabulary",
            t.shape()
        )));
    }
    Ok(EmbeddingMatrix {
        source_name: header.embedding_source.clone().unwrap_or_default(),
        rows: Matrix::from_vec(rows, dim, t.data().to_vec())?,
    })
}

fn build_pipeline(header: Header, mut tensors: Vec<(String, Tensor)>) -> Result<TrainedPipeline> {
    let model = match &header.model {
        ModelSpec::Linear(config) => {
            let weights = take(&mut tensors, "linear.weights")?;
            let bias = take(&mut tensors, "linear.bias")?;
            let idf = take(&mut tensors, "tfidf.idf")?;
            let dim = header.vocabulary.len();
            if weights.len() != dim || idf.len() != dim || header.feature_space.dim != dim {
                return Err(bad(format!(
                    "feature space mismatch: vocabulary {dim}, weights {}, idf {}, declared {}",
                    weights.len(),
                    idf.len(),
                    header.feature_space.dim
                )));
            }
            if bias.len() != 1 {
                return Err(bad("linear.bias must hold one value"));
            }
            let corpus_size = header.corpus_size.ok_or_else(|| bad("linear model without corpus_size"))?;
            TrainedModel::Linear {
                tfidf: TfidfModel::from_parts(header.vocabulary.clone(), idf.data().to_vec(), corpus_size)?,
                model: LinearModel {
                    weights: weights.data().to_vec(),
                    bias: bias.item(),
                    config: *config,
                    trained_on: header.feature_space.clone(),
                },
            }
        }
        ModelSpec::TextCnn(config) => {
            let embeddings = embeddings_from(&mut tensors, &header, config.embedding_dim)?;
            TrainedModel::TextCnn {
                vocabulary: header.vocabulary.clone(),
                model: TextCnnModel::from_parameters(config.clone(), std::mem::take(&mut tensors))?,
                embeddings,
            }
        }
        ModelSpec::Gru(config) => {
            let embeddings = embeddings_from(&mut tensors, &header, config.embedding_dim)?;
            TrainedModel::Gru {
                vocabulary: header.vocabulary.clone(),
                model: GruModel::from_parameters(config.clone(), std::mem::take(&mut tensors))?,
                embeddings,
            }
        }
    };
    if let Some((name, _)) = tensors.first() {
        return Err(bad(format!("unexpected tensor `{name}`")));
    }
    let p = TrainedPipeline {
        preprocess: header.preprocess,
        features: header.features,
        model,
    };
    if p.model_name() != header.kind {
        return Err(bad(format!("header kind `{}` does not match the stored model", header.kind)));
    }
    Ok(p)
}

pub fn load_pipeline(path: impl AsRef<Path>) -> Result<TrainedPipeline> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pipeline(&bytes).map_err(|e| match e {
        Error::Artifact(msg) => Error::Artifact(format!("{}: {msg}", path.display())),
        other => other,
    })
}
