//! Confusion matrices, per-class and macro metrics, and the k-fold driver.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_fold_plan, FoldPlan, LabeledCorpus};
use crate::error::{Error, Result};
use crate::pipeline::{fit_pipeline_tokens, PipelineSpec};
use crate::textprep::{preprocess_all, TokenSequence};
use crate::vectorize::EmbeddingTable;

pub use report::{
    render_confusion, render_report, render_table, Evaluated, MachineRecord, ReportFormat, ReportLabel,
    SCHEMA_VERSION,
};

/// Counts with label 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tp: self.tp + other.tp,
        }
    }
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            context: "true vs predicted labels",
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "non-binary label pair ({t}, {p}) at index {i}"
                )))
            }
        }
    }
    Ok(cm)
}

/// Unrounded fractions in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision0: f64,
    pub recall0: f64,
    pub f1_0: f64,
    pub precision1: f64,
    pub recall1: f64,
    pub f1_1: f64,
    pub macro_f1: f64,
}

impl Metrics {
    fn fields(&self) -> [f64; 8] {
        [
            self.accuracy,
            self.precision0,
            self.recall0,
            self.f1_0,
            self.precision1,
            self.recall1,
            self.f1_1,
            self.macro_f1,
        ]
    }

    fn from_fields(f: [f64; 8]) -> Metrics {
        Metrics {
            accuracy: f[0],
            precision0: f[1],
            recall0: f[2],
            f1_0: f[3],
            precision1: f[4],
            recall1: f[5],
            f1_1: f[6],
            macro_f1: f[7],
        }
    }

    /// Field-wise arithmetic mean.
    pub fn mean(all: &[Metrics]) -> Metrics {
        let mut sum = [0.0; 8];
        for m in all {
            for (s, v) in sum.iter_mut().zip(m.fields()) {
                *s += v;
            }
        }
        let n = all.len().max(1) as f64;
        Metrics::from_fields(sum.map(|s| s / n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: Metrics,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class precision, recall and F1 with 0 on a zero denominator.
pub fn classification_metrics(cm: &ConfusionMatrix) -> EvaluationReport {
    let precision1 = ratio(cm.tp, cm.tp + cm.fp);
    let recall1 = ratio(cm.tp, cm.tp + cm.fn_);
    let precision0 = ratio(cm.tn, cm.tn + cm.fn_);
    let recall0 = ratio(cm.tn, cm.tn + cm.fp);
    let (f1_0, f1_1) = (f1(precision0, recall0), f1(precision1, recall1));
    EvaluationReport {
        confusion: *cm,
        metrics: Metrics {
            accuracy: ratio(cm.tp + cm.tn, cm.total()),
            precision0,
            recall0,
            f1_0,
            precision1,
            recall1,
            f1_1,
            macro_f1: (f1_0 + f1_1) / 2.0,
        },
    }
}

pub fn evaluate_predictions(y_true: &[u8], y_pred: &[u8]) -> Result<EvaluationReport> {
    Ok(classification_metrics(&confusion_matrix(y_true, y_pred)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub per_fold: Vec<EvaluationReport>,
    /// Arithmetic means of the per-fold metrics.
    pub mean: Metrics,
    /// Sum of the per-fold confusion matrices.
    pub pooled: ConfusionMatrix,
}

impl CvResult {
    pub fn from_folds(k: usize, seed: u64, per_fold: Vec<EvaluationReport>) -> CvResult {
        let mean = Metrics::mean(&per_fold.iter().map(|r| r.metrics).collect::<Vec<_>>());
        let pooled = per_fold
            .iter()
            .fold(ConfusionMatrix::default(), |acc, r| acc.merge(&r.confusion));
        CvResult {
            k,
            seed,
            per_fold,
            mean,
            pooled,
        }
    }
}

/// Runs `fit_predict(fold, train, test)` on every fold of a stratified plan.
/// The closure returns predicted labels for `test` in order. Folds may run
/// in parallel; results are ordered by fold index.
pub fn cross_validate_with<F>(labels: &[u8], k: usize, seed: u64, fit_predict: F) -> Result<CvResult>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<Vec<u8>> + Sync,
{
    let plan = stratified_fold_plan(labels, k, seed)?;
    cross_validate_plan(labels, &plan, fit_predict)
}

pub fn cross_validate_plan<F>(labels: &[u8], plan: &FoldPlan, fit_predict: F) -> Result<CvResult>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<Vec<u8>> + Sync,
{
    let per_fold = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = (plan.train_indices(fold), plan.test_indices(fold));
            let wrap = |e: Error| Error::Fold {
                fold,
                source: Box::new(e),
            };
            let pred = fit_predict(fold, &train, &test).map_err(wrap)?;
            let truth: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
            evaluate_predictions(&truth, &pred).map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::from_folds(plan.k, plan.seed, per_fold))
}

/// k-fold evaluation of a full pipeline. Every fitted component (vocabulary,
/// TF-IDF weights, SMOTE, model) sees only the training split of its fold.
pub fn cross_validate(
    corpus: &LabeledCorpus,
    spec: &PipelineSpec,
    k: usize,
    seed: u64,
    embeddings: Option<&EmbeddingTable>,
) -> Result<CvResult> {
    let labels = corpus.labels();
    let tokens = preprocess_all(&corpus.texts(), &spec.preprocess);
    cross_validate_with(&labels, k, seed, |fold, train, test| {
        let pick = |idx: &[usize]| -> Vec<TokenSequence> { idx.iter().map(|&i| tokens[i].clone()).collect() };
        let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        log::info!("fold {}/{k}: training on {} rows", fold + 1, train.len());
        let model = fit_pipeline_tokens(&pick(train), &train_labels, spec, embeddings)?;
        Ok(model.predict_tokens(&pick(test))?.into_iter().map(|p| p.label).collect())
    })
}
