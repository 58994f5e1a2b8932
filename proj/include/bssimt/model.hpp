#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bssimt/corpus.hpp"
#include "bssimt/nn.hpp"
#include "bssimt/policy.hpp"

namespace bssimt {

struct ModelConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 2;
  int embed_dim = 64;
  int ffn_dim = 128;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  int source_vocab_size = 0;
  int target_vocab_size = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainingMetadata {
  std::int64_t steps = 0;
  std::string objective = "init";

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

enum class Side { Source, Target };

/// p(. | x_{<=read_count}, target_prefix). The prefix starts with the
/// begin-of-sentence id and the next token is predicted after its last entry.
struct PrefixQuery {
  TokenSeq source;
  TokenSeq target_prefix;
  int read_count = 1;
};

using Distribution = std::vector<double>;

/// Growable row-major matrix with a fixed column count.
class RowBuffer {
 public:
  explicit RowBuffer(int cols = 0) : cols_(cols) {}

  void append(const nn::RowVec& row);
  int rows() const { return cols_ == 0 ? 0 : static_cast<int>(data_.size() / static_cast<std::size_t>(cols_)); }
  nn::ConstMatMap head(int n) const { return nn::ConstMatMap(data_.data(), n, cols_); }
  nn::ConstMatMap all() const { return head(rows()); }

 private:
  int cols_;
  nn::Buffer data_;
};

/// Encoder state of a source stream read so far. The encoder is causal, so
/// appending a token never changes the states of earlier positions.
struct SourceMemory {
  std::vector<RowBuffer> keys, values;              // per encoder block
  std::vector<RowBuffer> cross_keys, cross_values;  // per cross-attention block
  int tokens = 0;
  bool closed = false;  // end-of-source sentinel appended

  /// Encoder rows visible with `read_count` source tokens read. The
  /// sentinel becomes visible together with the final token.
  int visible_rows(int read_count) const;
};

/// Target-side causal stream over <s> y_1 .. y_n.
struct TargetMemory {
  std::vector<RowBuffer> keys, values;  // per target self-attention block
  RowBuffer states;

  int length() const { return states.rows(); }
};

/// Incremental encoder-decoder scorer. The encoder and the target-side
/// stack are both causal. Source information enters only through
/// position-wise cross-attention blocks placed after the target stack, so the
/// distribution for target position i depends on exactly x_{<=g} and y_{<i},
/// whatever read counts the other positions use.
class Scorer {
 public:
  Scorer(ModelConfig config, Vocabulary source_vocab, Vocabulary target_vocab, std::uint64_t seed);

  static Scorer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const { return config_; }
  const Vocabulary& source_vocab() const { return source_vocab_; }
  const Vocabulary& target_vocab() const { return target_vocab_; }
  TrainingMetadata& metadata() { return metadata_; }
  const TrainingMetadata& metadata() const { return metadata_; }

  nn::Params parameters() const { return params_; }
  nn::Grads mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  struct LossResult {
    double loss = 0.0;  // summed over target tokens, label smoothing included
    int tokens = 0;     // I + 1 (end-of-sentence included)
  };

  /// Cross-entropy of the pair under `policy` (length I; the end-of-sentence
  /// token is predicted with the whole source). Adds weight * dLoss/dTheta
  /// to `grad`. A null `dropout_rng` disables dropout.
  LossResult accumulate_gradient(const SentencePair& pair, const Policy& policy, double weight,
                                 nn::Grads grad, Rng* dropout_rng, double label_smoothing) const;

  /// Teacher-forced log-probabilities from the batched training graph
  /// (no dropout), one row per target position including end-of-sentence.
  nn::Mat teacher_forced_log_probs(const SentencePair& pair, const Policy& policy) const;

  SourceMemory start_source() const;
  void append_source(SourceMemory& memory, TokenId token) const;
  void close_source(SourceMemory& memory) const;
  SourceMemory encode_source(const TokenSeq& source) const;  // appended and closed

  TargetMemory start_target() const;  // holds <s>
  void append_target(TargetMemory& memory, TokenId token) const;
  TargetMemory encode_target_prefix(const TokenSeq& prefix_with_bos) const;

  /// Log-distribution for the token after target row `row` (0-based; row 0
  /// is <s>) given `read_count` source tokens.
  nn::RowVec predict_log_probs(const SourceMemory& source, int read_count,
                               const TargetMemory& target, int row) const;

  Distribution score_prefix(const PrefixQuery& query) const;
  std::vector<Distribution> score_prefix_batch(std::span<const PrefixQuery> queries) const;
  TokenId greedy_next_token(const PrefixQuery& query) const;

  std::vector<double> token_embedding(Side side, TokenId token) const;

 private:
  struct Layout {
    nn::ParamRef source_embedding;
    nn::ParamRef target_embedding;
    std::vector<nn::Block> encoder;
    nn::LayerNorm encoder_norm;
    std::vector<nn::Block> target_stack;
    std::vector<nn::Block> cross_stack;
    nn::LayerNorm decoder_norm;
    nn::Linear output;
  };

  struct Graph;

  Scorer(ModelConfig config, Vocabulary source_vocab, Vocabulary target_vocab);
  void build_layout();
  nn::Mat forward(const SentencePair& pair, const Policy& policy, Rng* dropout_rng,
                  Graph& graph) const;
  void append_encoder_row(SourceMemory& memory, TokenId token) const;
  void validate_query(const PrefixQuery& query) const;
  nn::Mat embed(const TokenSeq& tokens, Side side, int first_position = 0) const;

  ModelConfig config_;
  Vocabulary source_vocab_;
  Vocabulary target_vocab_;
  TrainingMetadata metadata_;
  Layout layout_;
  nn::Buffer params_;
};

/// Index of the largest entry; ties resolve to the lowest id.
TokenId argmax_token(std::span<const double> values);
TokenId argmax_token(const nn::RowVec& values);

}  // namespace bssimt
