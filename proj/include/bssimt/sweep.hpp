#pragma once

#include <string>
#include <vector>

#include "bssimt/agent.hpp"
#include "bssimt/metrics.hpp"
#include "bssimt/search.hpp"

namespace bssimt {

struct SweepConfig {
  enum class Kind { Oracle, GtComparison, WaitK, Agent, FullSentence };

  Kind kind = Kind::Oracle;
  IntervalSchedule schedule;
  int k = 1;
  const Agent* agent = nullptr;
  double threshold = 0.5;
  std::string label;  // empty: derived from the fields

  static SweepConfig oracle(IntervalSchedule schedule);
  static SweepConfig gt_comparison(IntervalSchedule schedule);
  static SweepConfig waitk(int k);
  static SweepConfig agent_threshold(const Agent& agent, double threshold);
  static SweepConfig full_sentence();

  std::string name() const;
};

/// Oracle and comparison policies are searched per test sentence with its
/// full source. Each configuration decodes the whole set.
std::vector<DecodeResult> decode_config(const Scorer& scorer, const SweepConfig& config,
                                        const std::vector<SentencePair>& pairs, int workers = 1);

/// One row per configuration, sorted by AL.
std::vector<SweepRow> run_sweep(const Scorer& scorer, const std::vector<SweepConfig>& configs,
                                const std::vector<SentencePair>& pairs,
                                const std::vector<AlignmentSet>* alignments, int workers = 1);

}  // namespace bssimt
