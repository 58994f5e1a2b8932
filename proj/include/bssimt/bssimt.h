#ifndef BSSIMT_H
#define BSSIMT_H

/* C interface to the bssimt library. Every function returns a status code;
 * on failure bssimt_last_error() describes the problem for the calling
 * thread. Handles are owned by the caller and released with the matching
 * *_free function (NULL is accepted). */

#include <stddef.h>
#include <stdint.h>

#if defined(BSSIMT_BUILDING_LIBRARY)
#define BSSIMT_API __attribute__((visibility("default")))
#else
#define BSSIMT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bssimt_status {
  BSSIMT_OK = 0,
  BSSIMT_ERR_USAGE = 1,   /* invalid argument or configuration */
  BSSIMT_ERR_DATA = 2,    /* missing, malformed or inconsistent input files */
  BSSIMT_ERR_NUMERIC = 3, /* non-finite loss or gradient */
  BSSIMT_ERR_INTERNAL = 4
} bssimt_status;

typedef struct bssimt_vocab bssimt_vocab;
typedef struct bssimt_model bssimt_model;
typedef struct bssimt_agent bssimt_agent;

BSSIMT_API const char* bssimt_version(void);
BSSIMT_API const char* bssimt_last_error(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct bssimt_model_config {
  int encoder_layers;
  int decoder_layers;
  int heads;
  int embed_dim;
  int ffn_dim;
  double dropout;
  double label_smoothing;
} bssimt_model_config;

typedef struct bssimt_train_config {
  int epochs;
  int batch_size;
  double learning_rate;
  int warmup_steps;
  double weight_decay;
  double clip_norm;
  uint64_t seed;
  int workers;
  int64_t max_steps; /* 0: no cap */
} bssimt_train_config;

typedef struct bssimt_agent_config {
  int hidden_dim;
  int action_embed_dim;
  int status_projection_dim;
} bssimt_agent_config;

BSSIMT_API void bssimt_model_config_default(bssimt_model_config* config);
BSSIMT_API void bssimt_train_config_default(bssimt_train_config* config);
BSSIMT_API void bssimt_agent_config_default(bssimt_agent_config* config);

/* ---- corpus ----------------------------------------------------------- */

typedef struct bssimt_synth_config {
  int vocab_size;
  int min_length;
  int max_length;
  int lookahead;
  uint64_t seed;
  int train_count;
  int test_count;
} bssimt_synth_config;

BSSIMT_API void bssimt_synth_config_default(bssimt_synth_config* config);

/* Writes train.{src,tgt,align} and test.{src,tgt,align} into out_dir. */
BSSIMT_API bssimt_status bssimt_synth_write(const bssimt_synth_config* config, const char* out_dir);

BSSIMT_API bssimt_status bssimt_vocab_build(const char* text_path, int min_freq, bssimt_vocab** out);
BSSIMT_API bssimt_status bssimt_vocab_load(const char* path, bssimt_vocab** out);
BSSIMT_API bssimt_status bssimt_vocab_save(const bssimt_vocab* vocab, const char* path);
BSSIMT_API bssimt_status bssimt_vocab_size(const bssimt_vocab* vocab, size_t* size);
/* Id of a token, or the unknown id when absent. */
BSSIMT_API bssimt_status bssimt_vocab_encode(const bssimt_vocab* vocab, const char* token, int32_t* id);
BSSIMT_API void bssimt_vocab_free(bssimt_vocab* vocab);

/* ---- translation model ------------------------------------------------- */

BSSIMT_API bssimt_status bssimt_model_create(const bssimt_model_config* config,
                                             const bssimt_vocab* source_vocab,
                                             const bssimt_vocab* target_vocab, uint64_t seed,
                                             bssimt_model** out);
BSSIMT_API bssimt_status bssimt_model_load(const char* path, bssimt_model** out);
BSSIMT_API bssimt_status bssimt_model_save(const bssimt_model* model, const char* path);
BSSIMT_API bssimt_status bssimt_model_parameter_count(const bssimt_model* model, size_t* count);
BSSIMT_API bssimt_status bssimt_model_target_vocab_size(const bssimt_model* model, size_t* size);
BSSIMT_API void bssimt_model_free(bssimt_model* model);

/* Multi-path training (fixed_k <= 0 samples k uniformly per sentence). */
BSSIMT_API bssimt_status bssimt_model_train_multipath(bssimt_model* model, const char* source_path,
                                                      const char* target_path,
                                                      const bssimt_train_config* config,
                                                      int fixed_k, double* final_loss);
BSSIMT_API bssimt_status bssimt_model_train_full(bssimt_model* model, const char* source_path,
                                                 const char* target_path,
                                                 const bssimt_train_config* config,
                                                 double* final_loss);
BSSIMT_API bssimt_status bssimt_model_train_policy(bssimt_model* model, const char* source_path,
                                                   const char* target_path, const char* policy_path,
                                                   const bssimt_train_config* config,
                                                   double* final_loss);

/* Distribution over the target vocabulary after prefix[0..prefix_len)
 * (which starts with the begin-of-sentence id 0) given the first read_count
 * source ids. `out` must hold the target vocabulary size. */
BSSIMT_API bssimt_status bssimt_model_score_prefix(const bssimt_model* model, const int32_t* source,
                                                   size_t source_len, const int32_t* prefix,
                                                   size_t prefix_len, int read_count, double* out,
                                                   size_t out_len);

/* ---- policy search ------------------------------------------------------ */

typedef enum bssimt_search_method {
  BSSIMT_SEARCH_BINARY = 0,       /* midpoint-concavity binary search */
  BSSIMT_SEARCH_GT_COMPARISON = 1 /* first read count whose greedy token is the reference */
} bssimt_search_method;

BSSIMT_API bssimt_status bssimt_search(const bssimt_model* model, const char* source_path,
                                       const char* target_path, int l1, int r1,
                                       bssimt_search_method method, int workers,
                                       const char* policy_out, const char* trace_out);

typedef struct bssimt_alternate_report {
  int best_round;
  double best_dev_bleu;
} bssimt_alternate_report;

/* Replaces the model with the best round's model and writes the training-set
 * policies searched with it. */
BSSIMT_API bssimt_status bssimt_alternate_train(bssimt_model* model, const char* train_source,
                                                const char* train_target, const char* dev_source,
                                                const char* dev_target, int l1, int r1, int rounds,
                                                const bssimt_train_config* config,
                                                const char* policy_out,
                                                bssimt_alternate_report* report);

/* ---- agent -------------------------------------------------------------- */

BSSIMT_API bssimt_status bssimt_agent_create(const bssimt_agent_config* config,
                                             const bssimt_model* model, uint64_t seed,
                                             bssimt_agent** out);
BSSIMT_API bssimt_status bssimt_agent_load(const char* path, bssimt_agent** out);
BSSIMT_API bssimt_status bssimt_agent_save(const bssimt_agent* agent, const char* path);
BSSIMT_API void bssimt_agent_free(bssimt_agent* agent);

/* Trains on episodes rolled out from the given policies. With
 * ground_truth_status != 0 statuses carry reference tokens instead of the
 * model's greedy generations. Held-out paths may be NULL; otherwise the
 * held-out action accuracy is stored in *heldout_accuracy. */
BSSIMT_API bssimt_status bssimt_agent_train(bssimt_agent* agent, const bssimt_model* model,
                                            const char* source_path, const char* target_path,
                                            const char* policy_path, int ground_truth_status,
                                            const bssimt_train_config* config,
                                            const char* heldout_source, const char* heldout_target,
                                            const char* heldout_policy, double* final_loss,
                                            double* heldout_accuracy);

/* ---- decoding and evaluation --------------------------------------------- */

typedef enum bssimt_decode_mode {
  BSSIMT_DECODE_AGENT = 0,
  BSSIMT_DECODE_ORACLE = 1, /* follow a policy file */
  BSSIMT_DECODE_WAITK = 2,
  BSSIMT_DECODE_FULL = 3
} bssimt_decode_mode;

typedef struct bssimt_decode_options {
  bssimt_decode_mode mode;
  const bssimt_agent* agent; /* BSSIMT_DECODE_AGENT */
  double threshold;          /* BSSIMT_DECODE_AGENT */
  int k;                     /* BSSIMT_DECODE_WAITK */
  const char* policy_path;   /* BSSIMT_DECODE_ORACLE */
  int workers;
} bssimt_decode_options;

BSSIMT_API void bssimt_decode_options_default(bssimt_decode_options* options);

/* Writes one hypothesis per line; realized policies and action logs are
 * written when their paths are non-NULL. */
BSSIMT_API bssimt_status bssimt_decode(const bssimt_model* model, const char* source_path,
                                       const bssimt_decode_options* options,
                                       const char* hypothesis_out, const char* policy_out,
                                       const char* actions_out);

typedef struct bssimt_eval_report {
  double al;
  double bleu;
  double sufficiency;
  int has_sufficiency;
  int empty_hypotheses;
} bssimt_eval_report;

/* Plain-text evaluation. alignment_path may be NULL. */
BSSIMT_API bssimt_status bssimt_eval_files(const char* hypothesis_path, const char* reference_path,
                                           const char* policy_path, const char* source_path,
                                           const char* alignment_path, bssimt_eval_report* report);

typedef enum bssimt_sweep_kind {
  BSSIMT_SWEEP_ORACLE = 0,
  BSSIMT_SWEEP_GT_COMPARISON = 1,
  BSSIMT_SWEEP_WAITK = 2,
  BSSIMT_SWEEP_AGENT = 3,
  BSSIMT_SWEEP_FULL = 4
} bssimt_sweep_kind;

typedef struct bssimt_sweep_item {
  bssimt_sweep_kind kind;
  int l1, r1;              /* oracle and comparison schedules */
  int k;                   /* wait-k */
  const bssimt_agent* agent;
  double threshold;
} bssimt_sweep_item;

/* Writes the CSV report and, when json_out is non-NULL, the full-precision
 * sidecar. alignment_path may be NULL. */
BSSIMT_API bssimt_status bssimt_sweep(const bssimt_model* model, const bssimt_sweep_item* items,
                                      size_t item_count, const char* source_path,
                                      const char* target_path, const char* alignment_path,
                                      int workers, const char* csv_out, const char* json_out);

/* Long-format q,i,p rows for the pairs whose target length is target_length. */
BSSIMT_API bssimt_status bssimt_profile(const bssimt_model* model, const char* source_path,
                                        const char* target_path, int target_length,
                                        const double* q_grid, size_t q_count, int workers,
                                        const char* csv_out);

#ifdef __cplusplus
}
#endif

#endif /* BSSIMT_H */
