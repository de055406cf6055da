use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, CvResult, EvaluationReport, Metrics};
use crate::error::Result;
use crate::util::round_half_up;

/// Version of the machine-record layout. Bump on any field change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    MachineRecord,
}

/// Identifies a table row: the model and whether SMOTE was applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportLabel {
    pub model: String,
    pub smote: bool,
}

impl ReportLabel {
    pub fn setting(&self) -> &'static str {
        if self.smote {
            "SMOTE"
        } else {
            "NOT-SMOTE"
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Evaluated<'a> {
    Cv(&'a CvResult),
    Single(&'a EvaluationReport),
}

impl Evaluated<'_> {
    fn headline(&self) -> Metrics {
        match self {
            Evaluated::Cv(cv) => cv.mean,
            Evaluated::Single(r) => r.metrics,
        }
    }
}

/// Structured report: every raw count and unrounded metric, plus the run
/// configuration when one is supplied. Contains nothing time-dependent, so
/// identical runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineRecord {
    pub schema_version: u32,
    pub label: ReportLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CvResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
}

impl MachineRecord {
    pub fn new(label: ReportLabel, result: Evaluated<'_>, config: Option<serde_json::Value>) -> Self {
        let (cross_validation, evaluation) = match result {
            Evaluated::Cv(cv) => (Some(cv.clone()), None),
            Evaluated::Single(r) => (None, Some(*r)),
        };
        MachineRecord {
            schema_version: SCHEMA_VERSION,
            label,
            config,
            cross_validation,
            evaluation,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", round_half_up(100.0 * v, 2))
}

const HEADER: [&str; 4] = ["Model", "Setting", "Acc (%)", "F1-sc (%)"];

/// Aligned table with one row per result: model, SMOTE setting, accuracy and
/// macro F1 as percentages rounded half-up to two decimals.
pub fn render_table(rows: &[(ReportLabel, Evaluated<'_>)]) -> String {
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|(label, result)| {
            let m = result.headline();
            [label.model.clone(), label.setting().to_string(), pct(m.accuracy), pct(m.macro_f1)]
        })
        .collect();
    let width = |c: usize| {
        cells
            .iter()
            .map(|r| r[c].chars().count())
            .chain([HEADER[c].chars().count()])
            .max()
            .unwrap_or(0)
    };
    let (w0, w1, w2) = (width(0), width(1), width(2));
    let mut out = String::new();
    let line = |out: &mut String, c: [&str; 4]| {
        let _ = writeln!(out, "{:<w0$} | {:<w1$} | {:>w2$} | {}", c[0], c[1], c[2], c[3]);
    };
    line(&mut out, HEADER);
    let _ = writeln!(out, "{}-|-{}-|-{}-|-{}", "-".repeat(w0), "-".repeat(w1), "-".repeat(w2), "-".repeat(HEADER[3].len()));
    for r in &cells {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3]]);
    }
    out
}

pub fn render_report(label: &ReportLabel, result: Evaluated<'_>, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::TextTable => Ok(render_table(&[(label.clone(), result)])),
        ReportFormat::MachineRecord => MachineRecord::new(label.clone(), result, None).to_json(),
    }
}

/// 2x2 grid with counts and row-normalized percentages.
pub fn render_confusion(cm: &ConfusionMatrix, title: &str) -> String {
    let cell = |count: u64, row_total: u64| {
        let share = if row_total == 0 { 0.0 } else { count as f64 / row_total as f64 };
        format!("{count} ({}%)", pct(share))
    };
    let rows = [
        ("true 0", cell(cm.tn, cm.tn + cm.fp), cell(cm.fp, cm.tn + cm.fp)),
        ("true 1", cell(cm.fn_, cm.fn_ + cm.tp), cell(cm.tp, cm.fn_ + cm.tp)),
    ];
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap().max("pred 0".len());
    let w2 = rows.iter().map(|r| r.2.len()).max().unwrap().max("pred 1".len());
    let mut out = format!("{title}\n");
    let _ = writeln!(out, "{:<6} | {:>w1$} | {:>w2$}", "", "pred 0", "pred 1");
    for (name, a, b) in rows {
        let _ = writeln!(out, "{name:<6} | {a:>w1$} | {b:>w2$}");
    }
    out
}
