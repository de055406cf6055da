//! Labeled comment corpora: CSV ingestion, descriptive statistics and
//! stratified fold plans.
//!
//! The on-disk format is UTF-8 CSV with the header `id,text,label` and
//! RFC-4180 quoting. Labels are `0` (non-offensive) or `1` (offensive).

use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{round_half_up, seeded_rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub text: String,
    pub label: Option<u8>,
    /// Set at load time when the text is empty or whitespace only.
    pub degenerate: bool,
}

impl Comment {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<u8>) -> Self {
        let text = text.into();
        let degenerate = text.trim().is_empty();
        Comment {
            id: id.into(),
            text,
            label,
            degenerate,
        }
    }

    /// Whitespace-delimited word count of the raw text.
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    forum: String,
    comments: Vec<Comment>,
}

impl LabeledCorpus {
    pub fn new(forum: impl Into<String>, comments: Vec<Comment>) -> Result<Self> {
        if comments.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(c) = comments.iter().find(|c| !matches!(c.label, Some(0) | Some(1))) {
            return Err(Error::InvalidConfig(format!(
                "comment `{}` has no valid binary label",
                c.id
            )));
        }
        Ok(LabeledCorpus {
            forum: forum.into(),
            comments,
        })
    }

    /// Builds a corpus from parallel text/label slices with ids `0..n`.
    pub fn from_texts<S: AsRef<str>>(forum: &str, texts: &[S], labels: &[u8]) -> Result<Self> {
        if texts.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "corpus texts vs labels",
                expected: texts.len(),
                found: labels.len(),
            });
        }
        let comments = texts
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (t, &l))| Comment::new(i.to_string(), t.as_ref(), Some(l)))
            .collect();
        Self::new(forum, comments)
    }

    pub fn forum(&self) -> &str {
        &self.forum
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.comments.iter().map(|c| c.label.unwrap_or(0)).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.comments.iter().map(|c| c.text.as_str()).collect()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.comments.iter().filter(|c| c.label == Some(label)).count()
    }

    /// Sub-corpus made of the given comment indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Vec<&Comment> {
        indices.iter().map(|&i| &self.comments[i]).collect()
    }
}

pub fn load_corpus(path: impl AsRef<Path>, forum: &str) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_corpus_from_reader(file, path, forum)
}

/// Parses corpus CSV from any reader; `origin` is only used in messages.
pub fn load_corpus_from_reader<R: Read>(
    reader: R,
    origin: impl AsRef<Path>,
    forum: &str,
) -> Result<LabeledCorpus> {
    let origin = origin.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| csv_error(origin, 0, e))?.clone();
    let names: Vec<&str> = headers.iter().map(|h| h.trim_start_matches('\u{feff}').trim()).collect();
    if names != ["id", "text", "label"] {
        return Err(Error::BadHeader {
            path: origin.to_path_buf(),
            found: names.join(","),
        });
    }

    let mut comments = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(origin, row, e))?;
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                path: origin.to_path_buf(),
                row,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let raw_label = record[2].trim();
        let label = match raw_label.parse::<i64>() {
            Ok(v @ (0 | 1)) => v as u8,
            _ => {
                return Err(Error::InvalidLabel {
                    path: origin.to_path_buf(),
                    row,
                    value: raw_label.to_string(),
                })
            }
        };
        let comment = Comment::new(&record[0], &record[1], Some(label));
        if comment.degenerate {
            log::warn!("{}: row {row}: empty comment text", origin.display());
        }
        comments.push(comment);
    }
    LabeledCorpus::new(forum, comments)
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub forum: String,
    pub total: usize,
    pub count0: usize,
    pub count1: usize,
    /// Percentages rounded half-up to two decimals.
    pub pct0: f64,
    pub pct1: f64,
    /// Mean raw-text word count per label; 0 when the label is absent.
    pub avg_len0: f64,
    pub avg_len1: f64,
}

pub fn corpus_stats(corpus: &LabeledCorpus) -> CorpusStats {
    let mut counts = [0usize; 2];
    let mut words = [0usize; 2];
    for c in corpus.comments() {
        let l = c.label.unwrap_or(0) as usize;
        counts[l] += 1;
        words[l] += c.word_count();
    }
    let total = counts[0] + counts[1];
    let pct = |n: usize| round_half_up(100.0 * n as f64 / total as f64, 2);
    let avg = |w: usize, n: usize| if n == 0 { 0.0 } else { w as f64 / n as f64 };
    CorpusStats {
        forum: corpus.forum().to_string(),
        total,
        count0: counts[0],
        count1: counts[1],
        pct0: pct(counts[0]),
        pct1: pct(counts[1]),
        avg_len0: avg(words[0], counts[0]),
        avg_len1: avg(words[1], counts[1]),
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Forum: {}  (total {})", self.forum, self.total)?;
        writeln!(f, "{:<10} | {:>18} | {:>10}", "Label", "Count (%)", "Avg words")?;
        writeln!(f, "{:-<10}-+-{:->18}-+-{:->10}", "", "", "")?;
        writeln!(
            f,
            "{:<10} | {:>18} | {:>10.2}",
            "0",
            format!("{} ({:.2}%)", self.count0, self.pct0),
            self.avg_len0
        )?;
        write!(
            f,
            "{:<10} | {:>18} | {:>10.2}",
            "1",
            format!("{} ({:.2}%)", self.count1, self.pct1),
            self.avg_len1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldWarning {
    /// Fewer members than folds for this label; some folds get none.
    ClassSmallerThanK { label: u8, count: usize, k: usize },
}

impl fmt::Display for FoldWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldWarning::ClassSmallerThanK { label, count, k } => write!(
                f,
                "label {label} has {count} members for {k} folds; some test folds contain none"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every comment, in corpus order.
    pub assignments: Vec<usize>,
    pub warnings: Vec<FoldWarning>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Per-fold count of comments whose label equals `label`.
    pub fn label_counts(&self, labels: &[u8], label: u8) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (&f, &l) in self.assignments.iter().zip(labels) {
            if l == label {
                counts[f] += 1;
            }
        }
        counts
    }
}

pub fn make_stratified_folds(corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_fold_plan(&corpus.labels(), k, seed)
}

/// Each class is shuffled with the seed, then all members are dealt
/// round-robin into folds: minority class first, majority continuing where
/// the minority stopped. Each class therefore occupies a contiguous run of
/// the deal, which keeps both per-class and total fold sizes within one.
pub fn stratified_fold_plan(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("fold count must be >= 2, got {k}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => by_class[l as usize].push(i),
            other => {
                return Err(Error::InvalidConfig(format!("label {other} at index {i} is not binary")))
            }
        }
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::SingleClass);
    }

    let mut rng = seeded_rng(seed, 0);
    for class in &mut by_class {
        class.shuffle(&mut rng);
    }

    let mut warnings = Vec::new();
    for (label, class) in by_class.iter().enumerate() {
        if class.len() < k {
            let w = FoldWarning::ClassSmallerThanK {
                label: label as u8,
                count: class.len(),
                k,
            };
            log::warn!("{w}");
            warnings.push(w);
        }
    }

    let (minority, majority) = if by_class[1].len() <= by_class[0].len() {
        (1, 0)
    } else {
        (0, 1)
    };
    let mut assignments = vec![0; labels.len()];
    for (pos, &i) in by_class[minority].iter().chain(&by_class[majority]).enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
        warnings,
    })
}
