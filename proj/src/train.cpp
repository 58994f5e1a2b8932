#include "bssimt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bssimt/error.hpp"
#include "bssimt/parallel.hpp"

namespace bssimt {

namespace {

constexpr std::size_t kShards = 4;

}  // namespace

void TrainSchedule::validate() const {
  if (epochs < 1) usage_error("epochs must be at least 1");
  if (batch_size < 1) usage_error("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) usage_error("learning_rate must be positive");
  if (warmup_steps < 0) usage_error("warmup_steps must be non-negative");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    usage_error("Adam betas must lie in [0, 1)");
  }
  if (weight_decay < 0.0) usage_error("weight_decay must be non-negative");
  if (clip_norm < 0.0) usage_error("clip_norm must be non-negative");
  if (workers < 1) usage_error("workers must be at least 1");
  if (max_steps < 0) usage_error("max_steps must be non-negative");
}

AdamOptimizer::AdamOptimizer(std::size_t size, const TrainSchedule& schedule)
    : schedule_(schedule), m_(size, 0.0), v_(size, 0.0) {}

double AdamOptimizer::rate(std::int64_t step) const {
  const double s = static_cast<double>(std::max<std::int64_t>(step, 1));
  if (schedule_.warmup_steps == 0) return schedule_.learning_rate;
  const double w = static_cast<double>(schedule_.warmup_steps);
  return schedule_.learning_rate * std::min(s / w, std::sqrt(w / s));
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    usage_error("optimizer size mismatch");
  }
  ++steps_;
  const double lr = rate(steps_);
  const double b1 = schedule_.beta1, b2 = schedule_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double decay = lr * schedule_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mh = m_[i] / c1;
    const double vh = v_[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + schedule_.adam_epsilon) + decay * params[i];
  }
}

double clip_gradient(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) numeric_error("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

int sample_k(Rng& rng, int source_length) {
  if (source_length < 1) usage_error("source length must be positive");
  return rng.uniform_int(1, source_length);
}

TrainReport train_scorer(Scorer& scorer, const std::vector<SentencePair>& pairs,
                         const PolicySampler& sampler, const TrainSchedule& schedule,
                         const std::string& objective) {
  schedule.validate();
  if (pairs.empty()) usage_error("training corpus is empty");
  const std::size_t n = pairs.size();
  const std::size_t size = scorer.parameter_count();
  AdamOptimizer opt(size, schedule);
  std::vector<nn::Buffer> shard_grads(kShards, nn::Buffer(size));
  std::vector<double> shard_loss(kShards);
  nn::Buffer grad(size);
  const double smoothing = scorer.config().label_smoothing;

  TrainReport report;
  std::int64_t step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < schedule.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = Rng::substream(schedule.seed, "train-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    double epoch_loss = 0.0;
    long epoch_tokens = 0;
    for (std::size_t begin = 0; begin < n && !stop; begin += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(schedule.batch_size));
      const std::size_t count = end - begin;
      // Draw every policy on the calling thread first so the sampler may
      // hold state.
      std::vector<Policy> policies(count);
      long tokens = 0;
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = order[begin + b];
        const std::uint64_t draw = static_cast<std::uint64_t>(epoch) * n + begin + b;
        Rng rng = Rng::substream(schedule.seed, "train-policy", draw);
        policies[b] = sampler(pairs[idx], idx, rng);
        tokens += pairs[idx].target_length() + 1;
      }
      const double weight = 1.0 / static_cast<double>(tokens);
      parallel_for(kShards, schedule.workers, [&](std::size_t s) {
        auto& g = shard_grads[s];
        std::fill(g.begin(), g.end(), 0.0);
        double loss = 0.0;
        for (std::size_t b = count * s / kShards; b < count * (s + 1) / kShards; ++b) {
          const std::size_t idx = order[begin + b];
          const std::uint64_t draw = static_cast<std::uint64_t>(epoch) * n + begin + b;
          Rng drop = Rng::substream(schedule.seed, "train-dropout", draw);
          loss += scorer.accumulate_gradient(pairs[idx], policies[b], weight, g, &drop, smoothing).loss;
        }
        shard_loss[s] = loss;
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < kShards; ++s) {
        batch_loss += shard_loss[s];
        for (std::size_t i = 0; i < size; ++i) grad[i] += shard_grads[s][i];
      }
      if (!std::isfinite(batch_loss)) {
        numeric_error("non-finite training loss at step " + std::to_string(step + 1));
      }
      clip_gradient(grad, schedule.clip_norm);
      opt.step(scorer.mutable_parameters(), grad);
      ++step;
      epoch_loss += batch_loss;
      epoch_tokens += tokens;
      if (schedule.max_steps > 0 && step >= schedule.max_steps) stop = true;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  report.steps = step;
  report.final_loss = report.epoch_loss.back();
  scorer.metadata().steps += step;
  scorer.metadata().objective = objective;
  return report;
}

TrainReport train_policy_ce(Scorer& scorer, const std::vector<SentencePair>& pairs,
                            const std::vector<Policy>& policies, const TrainSchedule& schedule) {
  if (pairs.size() != policies.size()) {
    usage_error("got " + std::to_string(policies.size()) + " policies for " +
                std::to_string(pairs.size()) + " pairs");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (policies[i].length() != pairs[i].target_length()) {
      usage_error("policy " + std::to_string(i + 1) + " has length " +
                  std::to_string(policies[i].length()) + " but the target has " +
                  std::to_string(pairs[i].target_length()) + " tokens");
    }
    validate_policy(policies[i], pairs[i].source_length());
  }
  return train_scorer(
      scorer, pairs,
      [&](const SentencePair&, std::size_t idx, Rng&) { return policies[idx]; }, schedule,
      "policy");
}

TrainReport train_multipath(Scorer& scorer, const std::vector<SentencePair>& pairs,
                            const TrainSchedule& schedule, std::optional<int> fixed_k) {
  if (fixed_k && *fixed_k < 1) usage_error("k must be at least 1");
  return train_scorer(
      scorer, pairs,
      [&](const SentencePair& p, std::size_t, Rng& rng) {
        const int k = fixed_k ? *fixed_k : sample_k(rng, p.source_length());
        return waitk_policy(k, p.target_length(), p.source_length());
      },
      schedule, "multipath");
}

TrainReport train_full_sentence(Scorer& scorer, const std::vector<SentencePair>& pairs,
                                const TrainSchedule& schedule) {
  return train_scorer(
      scorer, pairs,
      [](const SentencePair& p, std::size_t, Rng&) {
        return full_sentence_policy(p.target_length(), p.source_length());
      },
      schedule, "full-sentence");
}

double evaluate_policy_ce(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                          const std::vector<Policy>& policies, int workers) {
  if (pairs.size() != policies.size()) usage_error("pair and policy counts differ");
  if (pairs.empty()) usage_error("evaluation corpus is empty");
  std::vector<double> loss(pairs.size());
  std::vector<int> tokens(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const auto r = scorer.accumulate_gradient(pairs[i], policies[i], 1.0, {}, nullptr, 0.0);
    loss[i] = r.loss;
    tokens[i] = r.tokens;
  });
  return std::accumulate(loss.begin(), loss.end(), 0.0) /
         static_cast<double>(std::accumulate(tokens.begin(), tokens.end(), 0L));
}

}  // namespace bssimt
