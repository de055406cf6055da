//! End-to-end fitting: preprocessing, features, optional SMOTE and a model,
//! bundled so prediction always reuses the settings it was trained with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imbalance::{smote_oversample_sparse, SmoteConfig};
use crate::linear::{predict_rows, report_score, train_linear, LinearModel, LinearModelConfig, LossKind};
use crate::matrix::SparseMatrix;
use crate::neural::{
    predict_encodings, train_neural, GruConfig, GruModel, NeuralNet, TextCnnConfig, TextCnnModel, TrainingSet,
};
use crate::textprep::{preprocess_all, PreprocessConfig, TokenSequence};
use crate::vectorize::{
    build_vocabulary, encode_sequence, tfidf_transform, EmbeddingMatrix, EmbeddingTable, TfidfModel, Vocabulary,
    DEFAULT_MAX_FEATURES, DEFAULT_SEQUENCE_LENGTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Tfidf,
    Embeddings,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Tfidf => "tfidf",
            FeatureKind::Embeddings => "embeddings",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub max_features: usize,
    /// Only used by the embedding features.
    pub sequence_length: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            max_features: DEFAULT_MAX_FEATURES,
            sequence_length: DEFAULT_SEQUENCE_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Linear(LinearModelConfig),
    TextCnn(TextCnnConfig),
    Gru(GruConfig),
}

impl ModelSpec {
    pub fn feature_kind(&self) -> FeatureKind {
        match self {
            ModelSpec::Linear(_) => FeatureKind::Tfidf,
            ModelSpec::TextCnn(_) | ModelSpec::Gru(_) => FeatureKind::Embeddings,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Linear(c) if c.loss == LossKind::Logistic => "logreg",
            ModelSpec::Linear(_) => "svm",
            ModelSpec::TextCnn(_) => "textcnn",
            ModelSpec::Gru(_) => "gru",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub model: ModelSpec,
    pub smote: Option<SmoteConfig>,
}

impl PipelineSpec {
    pub fn new(model: ModelSpec) -> Self {
        PipelineSpec {
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            model,
            smote: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.smote {
            s.validate()?;
        }
        match &self.model {
            ModelSpec::Linear(c) => c.validate(),
            ModelSpec::TextCnn(c) => self.textcnn_config(c, c.embedding_dim).validate(),
            ModelSpec::Gru(c) => self.gru_config(c, c.embedding_dim).validate(),
        }
    }

    fn textcnn_config(&self, c: &TextCnnConfig, dim: usize) -> TextCnnConfig {
        TextCnnConfig {
            sequence_length: self.features.sequence_length,
            embedding_dim: dim,
            ..c.clone()
        }
    }

    fn gru_config(&self, c: &GruConfig, dim: usize) -> GruConfig {
        GruConfig {
            sequence_length: self.features.sequence_length,
            embedding_dim: dim,
            ..c.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear {
        tfidf: TfidfModel,
        model: LinearModel,
    },
    TextCnn {
        vocabulary: Vocabulary,
        embeddings: EmbeddingMatrix,
        model: TextCnnModel,
    },
    Gru {
        vocabulary: Vocabulary,
        embeddings: EmbeddingMatrix,
        model: GruModel,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    /// Probability of label 1, except for the SVM, which reports its margin.
    pub score: f64,
    /// The input had no tokens left after preprocessing.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub model: TrainedModel,
}

impl TrainedPipeline {
    pub fn model_name(&self) -> &'static str {
        match &self.model {
            TrainedModel::Linear { model, .. } if model.config.loss == LossKind::Logistic => "logreg",
            TrainedModel::Linear { .. } => "svm",
            TrainedModel::TextCnn { .. } => "textcnn",
            TrainedModel::Gru { .. } => "gru",
        }
    }

    pub fn predict_texts<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<Prediction>> {
        self.predict_tokens(&preprocess_all(texts, &self.preprocess))
    }

    pub fn predict_tokens(&self, docs: &[TokenSequence]) -> Result<Vec<Prediction>> {
        let scored: Vec<(u8, f64)> = match &self.model {
            TrainedModel::Linear { tfidf, model } => predict_rows(model, &tfidf_transform(docs, tfidf))?
                .into_iter()
                .map(|(label, margin)| (label, report_score(model, margin)))
                .collect(),
            TrainedModel::TextCnn {
                vocabulary,
                embeddings,
                model,
            } => neural_scores(model, vocabulary, embeddings, self.features.sequence_length, docs)?,
            TrainedModel::Gru {
                vocabulary,
                embeddings,
                model,
            } => neural_scores(model, vocabulary, embeddings, self.features.sequence_length, docs)?,
        };
        Ok(scored
            .into_iter()
            .zip(docs)
            .map(|((label, score), d)| Prediction {
                label,
                score,
                empty: d.is_empty(),
            })
            .collect())
    }
}

fn neural_scores<M: NeuralNet>(
    model: &M,
    vocabulary: &Vocabulary,
    embeddings: &EmbeddingMatrix,
    sequence_length: usize,
    docs: &[TokenSequence],
) -> Result<Vec<(u8, f64)>> {
    let encodings: Vec<_> = docs.iter().map(|d| encode_sequence(d, vocabulary, sequence_length)).collect();
    Ok(predict_encodings(model, embeddings, &encodings)?
        .into_iter()
        .map(|p| (u8::from(p >= 0.5), p))
        .collect())
}

pub fn fit_pipeline<S: AsRef<str> + Sync>(
    texts: &[S],
    labels: &[u8],
    spec: &PipelineSpec,
    embeddings: Option<&EmbeddingTable>,
) -> Result<TrainedPipeline> {
    fit_pipeline_tokens(&preprocess_all(texts, &spec.preprocess), labels, spec, embeddings)
}

/// Fits every component on `docs` only. Neural models need `embeddings`.
pub fn fit_pipeline_tokens(
    docs: &[TokenSequence],
    labels: &[u8],
    spec: &PipelineSpec,
    embeddings: Option<&EmbeddingTable>,
) -> Result<TrainedPipeline> {
    spec.validate()?;
    if docs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "documents vs labels",
            expected: docs.len(),
            found: labels.len(),
        });
    }
    let model = match &spec.model {
        ModelSpec::Linear(config) => {
            let tfidf = TfidfModel::fit(docs, spec.features.max_features)?;
            let x = tfidf_transform(docs, &tfidf);
            let model = match &spec.smote {
                Some(s) => {
                    let (xs, ys): (SparseMatrix, Vec<u8>) = smote_oversample_sparse(&x, labels, s)?;
                    train_linear(&xs, &ys, config, FeatureKind::Tfidf.name())?
                }
                None => train_linear(&x, labels, config, FeatureKind::Tfidf.name())?,
            };
            TrainedModel::Linear { tfidf, model }
        }
        ModelSpec::TextCnn(c) => {
            let (vocabulary, matrix, set_parts) = neural_inputs(docs, labels, spec, embeddings)?;
            let config = spec.textcnn_config(c, matrix.dim());
            let model = {
                let set = training_set(&matrix, set_parts, spec.smote.as_ref())?;
                train_neural(TextCnnModel::init(config)?, &set)?
            };
            TrainedModel::TextCnn {
                vocabulary,
                embeddings: matrix,
                model,
            }
        }
        ModelSpec::Gru(c) => {
            let (vocabulary, matrix, set_parts) = neural_inputs(docs, labels, spec, embeddings)?;
            let config = spec.gru_config(c, matrix.dim());
            let model = {
                let set = training_set(&matrix, set_parts, spec.smote.as_ref())?;
                train_neural(GruModel::init(config)?, &set)?
            };
            TrainedModel::Gru {
                vocabulary,
                embeddings: matrix,
                model,
            }
        }
    };
    Ok(TrainedPipeline {
        preprocess: spec.preprocess.clone(),
        features: spec.features,
        model,
    })
}

type Encoded = (Vec<crate::vectorize::SequenceEncoding>, Vec<u8>);

fn neural_inputs(
    docs: &[TokenSequence],
    labels: &[u8],
    spec: &PipelineSpec,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(Vocabulary, EmbeddingMatrix, Encoded)> {
    let table = embeddings.ok_or_else(|| {
        Error::InvalidConfig(format!("model `{}` needs an embedding table", spec.model.name()))
    })?;
    let vocabulary = build_vocabulary(docs, spec.features.max_features)?;
    let matrix = EmbeddingMatrix::build(&vocabulary, table);
    let encodings = docs
        .iter()
        .map(|d| encode_sequence(d, &vocabulary, spec.features.sequence_length))
        .collect();
    Ok((vocabulary, matrix, (encodings, labels.to_vec())))
}

fn training_set<'e>(matrix: &'e EmbeddingMatrix, parts: Encoded, smote: Option<&SmoteConfig>) -> Result<TrainingSet<'e>> {
    let set = TrainingSet::new(matrix, parts.0, parts.1)?;
    match smote {
        Some(s) => set.with_smote(s),
        None => Ok(set),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::TrainingConfig;

    fn corpus() -> (Vec<String>, Vec<u8>) {
        let mut texts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let bad = i % 5 == 0;
            let filler = ["game", "match", "team", "play", "map", "hero"][i % 6];
            texts.push(if bad {
                format!("you noob {filler} idiot")
            } else {
                format!("nice {filler} well played")
            });
            labels.push(u8::from(bad));
        }
        (texts, labels)
    }

    #[test]
    fn logistic_pipeline_separates_and_scores_probabilities() {
        let (texts, labels) = corpus();
        let mut cfg = LinearModelConfig::new(LossKind::Logistic);
        cfg.c = 10.0;
        let spec = PipelineSpec::new(ModelSpec::Linear(cfg));
        let p = fit_pipeline(&texts, &labels, &spec, None).unwrap();
        let preds = p.predict_texts(&texts).unwrap();
        assert!(preds.iter().zip(&labels).all(|(p, &l)| p.label == l));
        assert!(preds.iter().all(|p| (0.0..=1.0).contains(&p.score)));
    }

    #[test]
    fn empty_after_preprocess_is_flagged() {
        let (texts, labels) = corpus();
        let spec = PipelineSpec::new(ModelSpec::Linear(LinearModelConfig::new(LossKind::Hinge)));
        let p = fit_pipeline(&texts, &labels, &spec, None).unwrap();
        let preds = p.predict_texts(&["the a an !!!", "noob"]).unwrap();
        assert!(preds[0].empty && !preds[1].empty);
        let TrainedModel::Linear { model, .. } = &p.model else { unreachable!() };
        assert_eq!(preds[0].score, model.bias);
    }

    #[test]
    fn neural_without_embeddings_is_rejected() {
        let (texts, labels) = corpus();
        let spec = PipelineSpec::new(ModelSpec::Gru(GruConfig::default()));
        let err = fit_pipeline(&texts, &labels, &spec, None).unwrap_err();
        assert!(err.to_string().contains("embedding"), "{err}");
    }

    #[test]
    fn textcnn_pipeline_with_smote_runs() {
        let (texts, labels) = corpus();
        let mut table = EmbeddingTable::new(3, "toy");
        for (i, w) in ["noob", "idiot", "nice", "well", "played", "game"].iter().enumerate() {
            table.insert(w, &[i as f64 * 0.3 - 0.5, 0.2, -(i as f64) * 0.1]).unwrap();
        }
        let spec = PipelineSpec {
            features: FeatureConfig {
                max_features: 50,
                sequence_length: 6,
            },
            smote: Some(SmoteConfig::default()),
            ..PipelineSpec::new(ModelSpec::TextCnn(TextCnnConfig {
                kernel_width: 2,
                num_filters: 4,
                training: TrainingConfig {
                    epochs: 2,
                    batch_size: 8,
                    ..TrainingConfig::default()
                },
                ..TextCnnConfig::default()
            }))
        };
        let p = fit_pipeline(&texts, &labels, &spec, Some(&table)).unwrap();
        let TrainedModel::TextCnn { model, .. } = &p.model else { unreachable!() };
        assert_eq!((model.config.embedding_dim, model.config.sequence_length), (3, 6));
        assert_eq!(p.predict_texts(&texts).unwrap().len(), 60);
    }
}
