#ifndef FORUMGUARD_H
#define FORUMGUARD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_ARGUMENT = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  FG_STATUS_IO = 3,
  // Malformed corpus, embedding or report input.
  FG_STATUS_INVALID_INPUT = 4,
  FG_STATUS_INVALID_CONFIG = 5,
  // The model file is corrupt or from an unsupported version.
  FG_STATUS_INVALID_MODEL = 6,
  // Training or prediction failed numerically or on shapes.
  FG_STATUS_COMPUTATION = 7,
  FG_STATUS_PANIC = 8,
} FgStatus;

// A loaded labeled corpus.
typedef struct FgCorpus FgCorpus;

// A loaded model. Safe to share between threads for prediction.
typedef struct FgModel FgModel;

typedef struct FgPrediction {
  // 0 = non-offensive, 1 = offensive.
  uint8_t label;
  // Probability of label 1; the SVM reports its signed margin instead.
  double score;
  // Nonzero when nothing was left of the text after preprocessing.
  uint8_t empty;
} FgPrediction;

typedef struct FgConfusion {
  uint64_t true_negatives;
  uint64_t false_positives;
  uint64_t false_negatives;
  uint64_t true_positives;
} FgConfusion;

// Fractions in [0, 1]; a metric with a zero denominator is 0.
typedef struct FgMetrics {
  double accuracy;
  double precision0;
  double recall0;
  double f1_0;
  double precision1;
  double recall1;
  double f1_1;
  double macro_f1;
} FgMetrics;

typedef struct FgCorpusStats {
  size_t total;
  size_t count0;
  size_t count1;
  // Percentages rounded to two decimals.
  double pct0;
  double pct1;
  // Mean words per comment.
  double avg_len0;
  double avg_len1;
} FgCorpusStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *fg_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *fg_version(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void fg_string_free(char *s);

// Loads a model file written by `forumguard train` or `cv`.
//
// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum FgStatus fg_model_load(const char *path, struct FgModel **out_model);

// # Safety
// `model` must be null or a handle from [`fg_model_load`], not yet freed.
void fg_model_free(struct FgModel *model);

// Model family: "logreg", "svm", "textcnn" or "gru". The string is static.
//
// # Safety
// `model` must be a live handle.
const char *fg_model_kind(const struct FgModel *model);

// Classifies one raw comment.
//
// # Safety
// `model` must be a live handle, `text` a NUL-terminated string and `out`
// writable.
enum FgStatus fg_model_predict(const struct FgModel *model,
                               const char *text,
                               struct FgPrediction *out);

// Classifies `count` raw comments; `out` receives `count` results in
// input order. Nothing is written to `out` on failure.
//
// # Safety
// `texts` must point to `count` NUL-terminated strings and `out` to room
// for `count` predictions.
enum FgStatus fg_model_predict_batch(const struct FgModel *model,
                                     const char *const *texts,
                                     size_t count,
                                     struct FgPrediction *out);

// Accuracy, per-class precision/recall/F1 and macro F1 for a confusion
// matrix.
//
// # Safety
// `confusion` must be readable and `out` writable.
enum FgStatus fg_metrics(const struct FgConfusion *confusion, struct FgMetrics *out);

// Loads a labeled corpus (`id,text,label` CSV) tagged with `forum`.
//
// # Safety
// `path` and `forum` must be NUL-terminated strings; `out_corpus` must be
// writable.
enum FgStatus fg_corpus_load(const char *path, const char *forum, struct FgCorpus **out_corpus);

// # Safety
// `corpus` must be null or a handle from [`fg_corpus_load`], not yet freed.
void fg_corpus_free(struct FgCorpus *corpus);

// # Safety
// `corpus` must be a live handle and `out` writable.
enum FgStatus fg_corpus_stats(const struct FgCorpus *corpus, struct FgCorpusStats *out);

// Runs the default preprocessing on `text` and returns the tokens joined
// by single spaces. Free the result with [`fg_string_free`].
//
// # Safety
// `text` must be a NUL-terminated string and `out_tokens` writable.
enum FgStatus fg_preprocess(const char *text, char **out_tokens);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORUMGUARD_H */
