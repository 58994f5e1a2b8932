#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "bssimt/model.hpp"
#include "bssimt/policy.hpp"
#include "bssimt/train.hpp"

namespace bssimt {

/// One (target position, read count) request against a probability profile.
struct Probe {
  int position = 1;    // i, 1-based
  int read_count = 1;  // g
};

/// Probability of the reference token y_i given x_{<=g} and the reference
/// prefix y_{<i}, for a single sentence pair.
class ProbabilityOracle {
 public:
  virtual ~ProbabilityOracle() = default;
  virtual int target_length() const = 0;
  virtual int source_length() const = 0;
  virtual double probability(int position, int read_count) const = 0;
  virtual void probability_batch(std::span<const Probe> probes, std::span<double> out) const;
};

/// Fixed profile table: rows are target positions, columns read counts 1..J.
class TableOracle final : public ProbabilityOracle {
 public:
  explicit TableOracle(std::vector<std::vector<double>> table);

  int target_length() const override { return static_cast<int>(table_.size()); }
  int source_length() const override { return source_length_; }
  double probability(int position, int read_count) const override;

  /// Number of probability() and batch entries served, for budget checks.
  long calls() const { return calls_; }

 private:
  std::vector<std::vector<double>> table_;
  int source_length_ = 0;
  mutable long calls_ = 0;
};

/// Teacher-forced scorer probabilities. The source and the reference prefix
/// are encoded once; each probe only runs the cross-attention stack.
class ScorerOracle final : public ProbabilityOracle {
 public:
  ScorerOracle(const Scorer& scorer, const SentencePair& pair);

  int target_length() const override { return pair_.target_length(); }
  int source_length() const override { return pair_.source_length(); }
  double probability(int position, int read_count) const override;

 private:
  const Scorer& scorer_;
  SentencePair pair_;
  SourceMemory source_;
  TargetMemory target_;
};

struct SearchStep {
  int l = 0, m = 0, r = 0;
  double p_l = 0.0, p_m = 0.0, p_r = 0.0;
  bool left = true;  // p_m >= (p_l + p_r) / 2
};

struct TokenTrace {
  int position = 0;
  int l = 0, r = 0;  // interval on entry
  std::vector<SearchStep> steps;
  int result = 0;
};

struct SearchTrace {
  std::vector<TokenTrace> tokens;
};

/// Binary search for g_i on [l, r]. Probabilities are cached by read count
/// inside one call.
int binary_search_token(const ProbabilityOracle& oracle, int position, int l, int r,
                        TokenTrace* trace = nullptr);

struct SearchResult {
  std::vector<int> raw;  // per-token results before projection
  Policy policy;         // running maximum of raw
  SearchTrace trace;
};

/// Searches every target token. The lockstep variant advances all tokens one
/// halving at a time and issues the pending probes as one batch; the
/// sequential variant searches token by token. Both return the same result.
SearchResult search_policy(const ProbabilityOracle& oracle, const IntervalSchedule& schedule);
SearchResult search_policy_sequential(const ProbabilityOracle& oracle,
                                      const IntervalSchedule& schedule);

Policy search_policy(const Scorer& scorer, const SentencePair& pair,
                     const IntervalSchedule& schedule, SearchTrace* trace = nullptr);

std::vector<Policy> search_policies(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                                    const IntervalSchedule& schedule, int workers = 1,
                                    std::vector<SearchTrace>* traces = nullptr);

void write_search_trace(std::ostream& out, const std::vector<SearchTrace>& traces);

/// Ablation: g_i is the smallest read count in [l_i, r_i] at which the greedy
/// token equals the reference (teacher-forced), else r_i; then projected.
Policy gt_comparison_policy(const Scorer& scorer, const SentencePair& pair,
                            const IntervalSchedule& schedule);
std::vector<Policy> gt_comparison_policies(const Scorer& scorer,
                                           const std::vector<SentencePair>& pairs,
                                           const IntervalSchedule& schedule, int workers = 1);

struct OracleEvaluation {
  double bleu = 0.0;
  double al = 0.0;
  std::vector<Policy> policies;  // searched on the evaluated pairs
};

/// Searches each pair with its full source, decodes along that policy and
/// scores the result against the references.
OracleEvaluation evaluate_oracle_policy(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                                        const IntervalSchedule& schedule, int workers = 1);

struct AlternateOptions {
  int rounds = 3;
  IntervalSchedule schedule;
  TrainSchedule training;
};

struct AlternateResult {
  Scorer best;
  int best_round = 0;                // 1-based
  std::vector<double> dev_bleu;      // oracle-policy BLEU after each round
  std::vector<Policy> policies;      // training-set search with `best`
};

/// Alternates policy search on the training pairs with policy-conditioned
/// training. The round whose model scores the highest held-out oracle-policy
/// BLEU is kept (earliest on ties).
AlternateResult alternate_train(const Scorer& initial, const std::vector<SentencePair>& train,
                                const std::vector<SentencePair>& dev,
                                const AlternateOptions& options);

}  // namespace bssimt
