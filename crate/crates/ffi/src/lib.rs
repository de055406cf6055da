//! C interface to forumguard.
//!
//! Every function returns an [`FgStatus`]; on anything other than
//! `FG_STATUS_OK` a description is available from
//! [`fg_last_error_message`] on the same thread. Handles are opaque and
//! must be released with their matching `_free` function. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`fg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use forumguard::artifact::load_pipeline;
use forumguard::corpus::{corpus_stats, load_corpus, LabeledCorpus};
use forumguard::evaluate::{classification_metrics, ConfusionMatrix};
use forumguard::pipeline::TrainedPipeline;
use forumguard::textprep::{preprocess_pipeline, PreprocessConfig};
use forumguard::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed corpus, embedding or report input.
    InvalidInput = 4,
    InvalidConfig = 5,
    /// The model file is corrupt or from an unsupported version.
    InvalidModel = 6,
    /// Training or prediction failed numerically or on shapes.
    Computation = 7,
    Panic = 8,
}

/// A loaded model. Safe to share between threads for prediction.
pub struct FgModel(TrainedPipeline);

/// A loaded labeled corpus.
pub struct FgCorpus(LabeledCorpus);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FgConfusion {
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_positives: u64,
}

/// Fractions in [0, 1]; a metric with a zero denominator is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FgMetrics {
    pub accuracy: f64,
    pub precision0: f64,
    pub recall0: f64,
    pub f1_0: f64,
    pub precision1: f64,
    pub recall1: f64,
    pub f1_1: f64,
    pub macro_f1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FgCorpusStats {
    pub total: usize,
    pub count0: usize,
    pub count1: usize,
    /// Percentages rounded to two decimals.
    pub pct0: f64,
    pub pct1: f64,
    /// Mean words per comment.
    pub avg_len0: f64,
    pub avg_len1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FgPrediction {
    /// 0 = non-offensive, 1 = offensive.
    pub label: u8,
    /// Probability of label 1; the SVM reports its signed margin instead.
    pub score: f64,
    /// Nonzero when nothing was left of the text after preprocessing.
    pub empty: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn status_for(error: &Error) -> FgStatus {
    match error {
        Error::Io { .. } => FgStatus::Io,
        Error::BadHeader { .. }
        | Error::MalformedRow { .. }
        | Error::InvalidLabel { .. }
        | Error::EmptyCorpus
        | Error::EmbeddingDimension { .. }
        | Error::EmbeddingParse { .. }
        | Error::Report(_) => FgStatus::InvalidInput,
        Error::InvalidConfig(_) | Error::InsufficientMinority { .. } | Error::SingleClass => FgStatus::InvalidConfig,
        Error::Artifact(_) => FgStatus::InvalidModel,
        Error::Fold { source, .. } => status_for(source),
        Error::DimensionMismatch { .. } | Error::ShapeMismatch { .. } | Error::NonFiniteLoss { .. } => {
            FgStatus::Computation
        }
    }
}

struct Failure(FgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_for(&e), e.to_string())
    }
}

/// Runs `body`, turning errors and panics into a status plus the
/// thread-local message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_error(&format!("internal panic: {message}"));
            FgStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FgStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FgStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(FgStatus::InvalidInput, "string contains an interior NUL".into()))
}

/// Message for the most recent failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a model file written by `forumguard train` or `cv`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_model_load(path: *const c_char, out_model: *mut *mut FgModel) -> FgStatus {
    guard(|| {
        let out = out_arg(out_model, "out_model")?;
        *out = ptr::null_mut();
        let model = load_pipeline(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FgModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`fg_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_model_free(model: *mut FgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model family: "logreg", "svm", "textcnn" or "gru". The string is static.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fg_model_kind(model: *const FgModel) -> *const c_char {
    match model.as_ref().map(|m| m.0.model_name()) {
        Some("logreg") => c"logreg".as_ptr(),
        Some("svm") => c"svm".as_ptr(),
        Some("textcnn") => c"textcnn".as_ptr(),
        Some("gru") => c"gru".as_ptr(),
        _ => ptr::null(),
    }
}

/// Classifies one raw comment.
///
/// # Safety
/// `model` must be a live handle, `text` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fg_model_predict(
    model: *const FgModel,
    text: *const c_char,
    out: *mut FgPrediction,
) -> FgStatus {
    fg_model_predict_batch(model, &text, 1, out)
}

/// Classifies `count` raw comments; `out` receives `count` results in
/// input order. Nothing is written to `out` on failure.
///
/// # Safety
/// `texts` must point to `count` NUL-terminated strings and `out` to room
/// for `count` predictions.
#[no_mangle]
pub unsafe extern "C" fn fg_model_predict_batch(
    model: *const FgModel,
    texts: *const *const c_char,
    count: usize,
    out: *mut FgPrediction,
) -> FgStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if count == 0 {
            return Ok(());
        }
        if texts.is_null() {
            return Err(null("texts"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let inputs = std::slice::from_raw_parts(texts, count)
            .iter()
            .enumerate()
            .map(|(i, &t)| str_arg(t, &format!("texts[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let predictions = model.0.predict_texts(&inputs)?;
        let out = std::slice::from_raw_parts_mut(out, count);
        for (slot, p) in out.iter_mut().zip(predictions) {
            *slot = FgPrediction {
                label: p.label,
                score: p.score,
                empty: u8::from(p.empty),
            };
        }
        Ok(())
    })
}

/// Accuracy, per-class precision/recall/F1 and macro F1 for a confusion
/// matrix.
///
/// # Safety
/// `confusion` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_metrics(confusion: *const FgConfusion, out: *mut FgMetrics) -> FgStatus {
    guard(|| {
        let c = confusion.as_ref().ok_or_else(|| null("confusion"))?;
        let out = out_arg(out, "out")?;
        let m = classification_metrics(&ConfusionMatrix {
            tn: c.true_negatives,
            fp: c.false_positives,
            fn_: c.false_negatives,
            tp: c.true_positives,
        })
        .metrics;
        *out = FgMetrics {
            accuracy: m.accuracy,
            precision0: m.precision0,
            recall0: m.recall0,
            f1_0: m.f1_0,
            precision1: m.precision1,
            recall1: m.recall1,
            f1_1: m.f1_1,
            macro_f1: m.macro_f1,
        };
        Ok(())
    })
}

/// Loads a labeled corpus (`id,text,label` CSV) tagged with `forum`.
///
/// # Safety
/// `path` and `forum` must be NUL-terminated strings; `out_corpus` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fg_corpus_load(
    path: *const c_char,
    forum: *const c_char,
    out_corpus: *mut *mut FgCorpus,
) -> FgStatus {
    guard(|| {
        let out = out_arg(out_corpus, "out_corpus")?;
        *out = ptr::null_mut();
        let corpus = load_corpus(str_arg(path, "path")?, str_arg(forum, "forum")?)?;
        *out = Box::into_raw(Box::new(FgCorpus(corpus)));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle from [`fg_corpus_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_corpus_free(corpus: *mut FgCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_corpus_stats(corpus: *const FgCorpus, out: *mut FgCorpusStats) -> FgStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let out = out_arg(out, "out")?;
        let s = corpus_stats(&corpus.0);
        *out = FgCorpusStats {
            total: s.total,
            count0: s.count0,
            count1: s.count1,
            pct0: s.pct0,
            pct1: s.pct1,
            avg_len0: s.avg_len0,
            avg_len1: s.avg_len1,
        };
        Ok(())
    })
}

/// Runs the default preprocessing on `text` and returns the tokens joined
/// by single spaces. Free the result with [`fg_string_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string and `out_tokens` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_preprocess(text: *const c_char, out_tokens: *mut *mut c_char) -> FgStatus {
    guard(|| {
        let out = out_arg(out_tokens, "out_tokens")?;
        *out = ptr::null_mut();
        let tokens = preprocess_pipeline(str_arg(text, "text")?, &PreprocessConfig::default());
        *out = owned_string(tokens.join())?;
        Ok(())
    })
}
