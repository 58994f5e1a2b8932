#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bssimt/model.hpp"

namespace bssimt {

struct TrainSchedule {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;  // peak rate, reached at the end of warmup
  int warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_epsilon = 1e-9;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 1.0;     // global gradient norm; 0 disables clipping
  std::uint64_t seed = 1;
  int workers = 1;
  std::int64_t max_steps = 0;  // 0 means no cap

  void validate() const;
};

struct TrainReport {
  std::int64_t steps = 0;
  std::vector<double> epoch_loss;  // mean per-token loss of each epoch
  double final_loss = 0.0;
};

/// Adam with linear warmup followed by inverse square-root decay.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, const TrainSchedule& schedule);

  double rate(std::int64_t step) const;  // step is 1-based
  void step(std::span<double> params, std::span<const double> grad);
  std::int64_t steps() const { return steps_; }

 private:
  TrainSchedule schedule_;
  std::vector<double> m_, v_;
  std::int64_t steps_ = 0;
};

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before scaling. Throws a numeric error on a non-finite norm.
double clip_gradient(std::span<double> grad, double max_norm);

/// Chooses the read-count policy for a pair at one update.
using PolicySampler = std::function<Policy(const SentencePair&, std::size_t index, Rng& rng)>;

/// Mini-batch cross-entropy training of the scorer; the loss is averaged over
/// the target tokens of a batch. Gradients are accumulated over a fixed set
/// of shards and summed in order, so results do not depend on `workers`.
TrainReport train_scorer(Scorer& scorer, const std::vector<SentencePair>& pairs,
                         const PolicySampler& sampler, const TrainSchedule& schedule,
                         const std::string& objective);

/// Policy-conditioned cross-entropy with one fixed policy per pair.
TrainReport train_policy_ce(Scorer& scorer, const std::vector<SentencePair>& pairs,
                            const std::vector<Policy>& policies, const TrainSchedule& schedule);

/// Multi-path training: each sentence draws k ~ U{1..J} at every update and
/// follows the wait-k path. `fixed_k` pins k for every sentence.
TrainReport train_multipath(Scorer& scorer, const std::vector<SentencePair>& pairs,
                            const TrainSchedule& schedule, std::optional<int> fixed_k = {});

TrainReport train_full_sentence(Scorer& scorer, const std::vector<SentencePair>& pairs,
                                const TrainSchedule& schedule);

int sample_k(Rng& rng, int source_length);

/// Mean per-token cross-entropy (no smoothing, no dropout) under `policies`.
double evaluate_policy_ce(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                          const std::vector<Policy>& policies, int workers = 1);

}  // namespace bssimt
