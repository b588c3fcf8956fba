#ifndef ADLENS_H
#define ADLENS_H

/* Generated by cbindgen; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define ADLENS_OK 0

// Bad arguments or preconditions.
#define ADLENS_ERR_USAGE 1

// Malformed or insufficient input data.
#define ADLENS_ERR_DATA 2

// Numeric failure (non-finite values) or an internal panic.
#define ADLENS_ERR_NUMERIC 3

// Architecture selector for `AdlensTrainOptions`.
#define ADLENS_ARCH_CNN 0

#define ADLENS_ARCH_LSTM 1

#define ADLENS_ARCH_CNN_LSTM 2

// An owned transcript collection.
typedef struct AdlensCorpus AdlensCorpus;

// A trained model with its vocabulary and input mode.
typedef struct AdlensModel AdlensModel;

// Training configuration. Convolution widths are fixed per architecture
// (3,4,5 for the convolutional model; 3,4,5,6 for the hybrid).
typedef struct AdlensTrainOptions {
  // One of the `ADLENS_ARCH_*` constants.
  int arch;
  // Nonzero to interleave POS-tag tokens with words.
  int tagged;
  uint64_t seed;
  uintptr_t vocab_max;
  uintptr_t max_epochs;
  // Epochs without dev improvement before stopping; 0 runs one epoch.
  uintptr_t patience;
  uintptr_t batch_size;
  double learning_rate;
  uintptr_t embed_dim;
  // Filters per convolution width; convolutional architectures only.
  uintptr_t filters;
  // Recurrent state size; recurrent architectures only.
  uintptr_t hidden;
  // Stacked recurrent layers; pure-recurrent architecture only.
  uintptr_t layers;
  double keep_prob;
  uintptr_t max_len;
} AdlensTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *adlens_last_error_message(void);

// Parse every `*.cha` file in a directory.
//
// # Safety
// `dir` must be a valid NUL-terminated path; `out` receives an owned handle.
int adlens_corpus_load_dir(const char *dir, struct AdlensCorpus **out);

// Parse one transcript from text and append nothing else.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` receives an owned
// handle.
int adlens_corpus_from_text(const char *text, struct AdlensCorpus **out);

// Deterministic synthetic corpus; see the library documentation for its
// construction.
//
// # Safety
// `out` receives an owned handle.
int adlens_corpus_synthetic(uintptr_t n_transcripts,
                            double ad_fraction,
                            uint64_t seed,
                            struct AdlensCorpus **out);

// # Safety
// `corpus` must come from a corpus constructor and not be freed twice.
void adlens_corpus_free(struct AdlensCorpus *corpus);

// # Safety
// `corpus` must be a live corpus handle.
uintptr_t adlens_corpus_num_transcripts(const struct AdlensCorpus *corpus);

// Utterances available for training. With `require_pos` nonzero, only
// utterances carrying an aligned POS tier are counted.
//
// # Safety
// `corpus` must be a live corpus handle.
uintptr_t adlens_corpus_num_utterances(const struct AdlensCorpus *corpus, int require_pos);

// Production defaults for the given architecture.
struct AdlensTrainOptions adlens_train_options_default(int arch);

// Train on an 80/10/10 seeded split of the corpus and return the model of
// the best dev epoch.
//
// # Safety
// `corpus` and `options` must be live pointers; `out` receives an owned
// handle.
int adlens_train(const struct AdlensCorpus *corpus,
                 const struct AdlensTrainOptions *options,
                 struct AdlensModel **out);

// # Safety
// `model` must come from `adlens_train` or `adlens_model_load` and not be
// freed twice.
void adlens_model_free(struct AdlensModel *model);

// # Safety
// `model` must be live; `dir` must be a valid NUL-terminated path.
int adlens_model_save(const struct AdlensModel *model, const char *dir);

// # Safety
// `dir` must be a valid NUL-terminated path; `out` receives an owned handle.
int adlens_model_load(const char *dir, struct AdlensModel **out);

// Accuracy over every eligible utterance in the corpus, with the majority
// baseline for reference. Either output pointer may be null to skip it.
//
// # Safety
// `model` and `corpus` must be live handles.
int adlens_evaluate(const struct AdlensModel *model,
                    const struct AdlensCorpus *corpus,
                    double *accuracy,
                    double *baseline);

// Plain-text saliency heatmap for one utterance, addressed by transcript id
// and utterance index. The returned string is released with
// `adlens_string_free`.
//
// # Safety
// `model` and `corpus` must be live handles; `transcript_id` must be a
// valid NUL-terminated string.
int adlens_saliency_text(const struct AdlensModel *model,
                         const struct AdlensCorpus *corpus,
                         const char *transcript_id,
                         uintptr_t utterance_index,
                         char **out);

// # Safety
// `s` must come from this library and not be freed twice.
void adlens_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADLENS_H */
