//! Runs a configured experiment end to end and writes its artifacts.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::artifact::save_pipeline;
use crate::corpus::{load_corpus, LabeledCorpus};
use crate::error::{Error, Result};
use crate::evaluate::{cross_validate, render_confusion, render_table, CvResult, Evaluated, MachineRecord, ReportLabel};
use crate::pipeline::{fit_pipeline_tokens, FeatureKind, ModelSpec, PipelineSpec, TrainedPipeline};
use crate::textprep::preprocess_all;
use crate::util::write_atomic;
use crate::vectorize::{load_embeddings_filtered, EmbeddingTable};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const CONFUSION_TEXT: &str = "confusion.txt";
pub const MODEL_FILE: &str = "model.fgm";
/// Present in the output directory while a run is in progress or after it
/// failed; holds the failure message in the latter case.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub forum: String,
    pub spec: PipelineSpec,
    pub feature_kind: FeatureKind,
    pub folds: usize,
    pub seed: u64,
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Checks settings and input paths; nothing is read or written yet.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let expected = self.spec.model.feature_kind();
        if self.feature_kind != expected {
            return Err(Error::InvalidConfig(format!(
                "model `{}` requires `{}` features, got `{}`",
                self.spec.model.name(),
                expected.name(),
                self.feature_kind.name()
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("fold count must be >= 2, got {}", self.folds)));
        }
        if !self.data.is_file() {
            return Err(Error::InvalidConfig(format!("dataset {} does not exist", self.data.display())));
        }
        match (&self.embeddings, expected) {
            (None, FeatureKind::Embeddings) => Err(Error::InvalidConfig(format!(
                "model `{}` needs --embeddings",
                self.spec.model.name()
            ))),
            (Some(p), FeatureKind::Embeddings) if !p.is_file() => Err(Error::InvalidConfig(format!(
                "embedding file {} does not exist",
                p.display()
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> ReportLabel {
        ReportLabel {
            model: self.spec.model.name().to_string(),
            smote: self.spec.smote.is_some(),
        }
    }
}

/// Loads the corpus and, for neural models, the embedding rows of tokens
/// that occur in it.
pub fn load_inputs(config: &ExperimentConfig) -> Result<(LabeledCorpus, Option<EmbeddingTable>)> {
    let corpus = load_corpus(&config.data, &config.forum)?;
    let table = match (&config.embeddings, config.spec.model.feature_kind()) {
        (Some(path), FeatureKind::Embeddings) => {
            let docs = preprocess_all(&corpus.texts(), &config.spec.preprocess);
            let vocab: HashSet<String> = docs.iter().flat_map(|d| d.iter().map(str::to_string)).collect();
            let table = load_embeddings_filtered(path, config.embedding_dim, Some(&vocab))?;
            log::info!("{} of {} corpus tokens have embeddings", table.len(), vocab.len());
            Some(table)
        }
        _ => None,
    };
    Ok((corpus, table))
}

pub fn train_final(corpus: &LabeledCorpus, spec: &PipelineSpec, table: Option<&EmbeddingTable>) -> Result<TrainedPipeline> {
    let docs = preprocess_all(&corpus.texts(), &spec.preprocess);
    fit_pipeline_tokens(&docs, &corpus.labels(), spec, table)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub cv: CvResult,
    pub record: MachineRecord,
    pub out_dir: PathBuf,
}

/// Cross-validates, then trains the final model on the full corpus. The
/// output directory receives `report.json`, `report.txt`, `confusion.txt`
/// and `model.fgm`; on failure the `INCOMPLETE` marker stays behind with
/// the error message.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write_atomic(&marker, b"run in progress\n")?;

    match run_inner(config) {
        Ok(outcome) => {
            std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            Ok(outcome)
        }
        Err(e) => {
            let _ = write_atomic(&marker, format!("run failed: {e}\n").as_bytes());
            Err(e)
        }
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dir = &config.out_dir;
    let (corpus, table) = load_inputs(config)?;
    let cv = cross_validate(&corpus, &config.spec, config.folds, config.seed, table.as_ref())?;

    let label = config.label();
    let record = MachineRecord::new(label.clone(), Evaluated::Cv(&cv), Some(serde_json::to_value(config)?));
    write_atomic(&dir.join(REPORT_JSON), record.to_json()?.as_bytes())?;
    write_atomic(&dir.join(REPORT_TEXT), render_table(&[(label, Evaluated::Cv(&cv))]).as_bytes())?;
    write_atomic(&dir.join(CONFUSION_TEXT), confusion_document(&cv).as_bytes())?;

    let model = train_final(&corpus, &config.spec, table.as_ref())?;
    save_pipeline(dir.join(MODEL_FILE), &model)?;
    Ok(ExperimentOutcome {
        cv,
        record,
        out_dir: dir.clone(),
    })
}

pub fn confusion_document(cv: &CvResult) -> String {
    let mut out = String::new();
    for (i, r) in cv.per_fold.iter().enumerate() {
        let _ = writeln!(out, "{}", render_confusion(&r.confusion, &format!("fold {}", i + 1)));
    }
    out.push_str(&render_confusion(&cv.pooled, "all folds"));
    out
}

/// Summary of a [`batch_predict`] run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchSummary {
    pub lines: usize,
    pub empty_after_preprocess: usize,
}

/// Scores one comment per input line, writing `label<TAB>score<TAB>text`
/// in input order. Lines with no tokens left after preprocessing get the
/// model's bias-only decision and an `empty-after-preprocess` note on
/// `notes`.
pub fn batch_predict<R: BufRead, W: Write, N: Write>(
    model: &TrainedPipeline,
    input: R,
    mut out: W,
    mut notes: N,
    origin: &Path,
) -> Result<BatchSummary> {
    let lines: Vec<String> = input
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(origin, e))?;
    let preds = model.predict_texts(&lines)?;
    let mut summary = BatchSummary {
        lines: lines.len(),
        ..BatchSummary::default()
    };
    let io_err = |e| Error::io("<output>", e);
    for (i, (line, p)) in lines.iter().zip(&preds).enumerate() {
        writeln!(out, "{}\t{}\t{}", p.label, p.score, line).map_err(io_err)?;
        if p.empty {
            summary.empty_after_preprocess += 1;
            writeln!(notes, "line {}: empty-after-preprocess", i + 1).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(summary)
}

/// Model kind from its CLI name.
pub fn model_spec_for(name: &str) -> Option<fn() -> ModelSpec> {
    use crate::linear::{LinearModelConfig, LossKind};
    use crate::neural::{GruConfig, TextCnnConfig};
    match name {
        "logreg" => Some(|| ModelSpec::Linear(LinearModelConfig::new(LossKind::Logistic))),
        "svm" => Some(|| ModelSpec::Linear(LinearModelConfig::new(LossKind::Hinge))),
        "textcnn" => Some(|| ModelSpec::TextCnn(TextCnnConfig::default())),
        "gru" => Some(|| ModelSpec::Gru(GruConfig::default())),
        _ => None,
    }
}
