#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bssimt/actions.hpp"
#include "bssimt/decode.hpp"
#include "bssimt/model.hpp"
#include "bssimt/nn.hpp"
#include "bssimt/train.hpp"

namespace bssimt {

struct AgentConfig {
  int hidden_dim = 64;
  int action_embed_dim = 64;
  int status_projection_dim = 64;

  void validate() const;
  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// Frozen copies of the scorer's input embedding tables.
struct StatusEmbeddings {
  nn::Mat source;
  nn::Mat target;

  static StatusEmbeddings from(const Scorer& scorer);
  int dim() const { return static_cast<int>(source.cols()); }
};

struct AgentState {
  nn::RowVec h;
  nn::RowVec c;
};

/// One decision sequence: statuses[t] is observed before action labels[t + 1].
/// labels is the complete action sequence, whose first READ is forced.
struct AgentEpisode {
  std::vector<TranslationStatus> statuses;
  ActionSequence labels;
};

/// Token projection of [source embedding, target embedding] and action
/// projection of a learned action embedding feed one LSTM layer; a linear
/// read-out gives p(WRITE).
class Agent {
 public:
  Agent(AgentConfig config, int embed_dim, std::uint64_t seed);

  static Agent load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const AgentConfig& config() const { return config_; }
  int embed_dim() const { return embed_dim_; }
  nn::Params parameters() const { return params_; }
  nn::Grads mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  AgentState initial_state() const;

  /// Advances the state and returns p(WRITE).
  double step(const StatusEmbeddings& embeddings, AgentState& state,
              const TranslationStatus& status) const;

  /// WRITE iff p(WRITE) >= threshold.
  Action decide(const StatusEmbeddings& embeddings, AgentState& state,
                const TranslationStatus& status, double threshold = 0.5) const;

  struct EpisodeResult {
    double loss = 0.0;  // summed binary cross-entropy
    int steps = 0;
    int correct = 0;    // decisions at threshold 0.5 that match the labels
  };

  /// Teacher-forced pass over an episode; adds weight * dLoss/dTheta to
  /// `grad` unless it is empty.
  EpisodeResult run_episode(const StatusEmbeddings& embeddings, const AgentEpisode& episode,
                            double weight, nn::Grads grad) const;

 private:
  struct Layout {
    nn::Linear token_projection;
    nn::ParamRef action_embedding;
    nn::Linear action_projection;
    nn::Linear lstm;  // [token proj, action proj, h] -> 4 gates (input, forget, cell, output)
    nn::Linear output;
  };

  Agent(AgentConfig config, int embed_dim);
  void build_layout();
  nn::Mat token_inputs(const StatusEmbeddings& embeddings,
                       const std::vector<TranslationStatus>& statuses) const;

  AgentConfig config_;
  int embed_dim_;
  Layout layout_;
  nn::Buffer params_;
};

enum class StatusMode { Generated, GroundTruth };

/// Rolls out each policy's action sequence. In Generated mode a WRITE records
/// the scorer's greedy token given the generated prefix and the tokens read
/// so far; in GroundTruth mode it records the reference token.
std::vector<AgentEpisode> make_training_episodes(const Scorer& scorer,
                                                 const std::vector<SentencePair>& pairs,
                                                 const std::vector<Policy>& policies,
                                                 StatusMode mode, int workers = 1);

/// Mean binary cross-entropy per decision over each batch.
TrainReport train_agent(Agent& agent, const StatusEmbeddings& embeddings,
                        const std::vector<AgentEpisode>& episodes, const TrainSchedule& schedule);

/// Fraction of decisions (threshold 0.5) that match the labels.
double action_accuracy(const Agent& agent, const StatusEmbeddings& embeddings,
                       const std::vector<AgentEpisode>& episodes, int workers = 1);

class AgentDriver final : public DecodeDriver {
 public:
  AgentDriver(const Agent& agent, const StatusEmbeddings& embeddings, double threshold = 0.5);
  Action decide(const TranslationStatus& status, int read, int written) override;

 private:
  const Agent& agent_;
  const StatusEmbeddings& embeddings_;
  double threshold_;
  AgentState state_;
};

}  // namespace bssimt
