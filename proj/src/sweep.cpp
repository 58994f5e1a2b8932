#include "bssimt/sweep.hpp"

#include <cstdio>
#include <memory>
#include <optional>

#include "bssimt/error.hpp"

namespace bssimt {

SweepConfig SweepConfig::oracle(IntervalSchedule schedule) {
  SweepConfig c;
  c.schedule = schedule;
  return c;
}

SweepConfig SweepConfig::gt_comparison(IntervalSchedule schedule) {
  SweepConfig c;
  c.kind = Kind::GtComparison;
  c.schedule = schedule;
  return c;
}

SweepConfig SweepConfig::waitk(int k) {
  SweepConfig c;
  c.kind = Kind::WaitK;
  c.k = k;
  return c;
}

SweepConfig SweepConfig::agent_threshold(const Agent& agent, double threshold) {
  SweepConfig c;
  c.kind = Kind::Agent;
  c.agent = &agent;
  c.threshold = threshold;
  return c;
}

SweepConfig SweepConfig::full_sentence() {
  SweepConfig c;
  c.kind = Kind::FullSentence;
  return c;
}

std::string SweepConfig::name() const {
  if (!label.empty()) return label;
  const std::string interval =
      "[" + std::to_string(schedule.l1) + ":" + std::to_string(schedule.r1) + "]";
  switch (kind) {
    case Kind::Oracle:
      return "oracle" + interval;
    case Kind::GtComparison:
      return "gt" + interval;
    case Kind::WaitK:
      return "wait-" + std::to_string(k);
    case Kind::Agent: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "agent@%.2f", threshold);
      return buf;
    }
    case Kind::FullSentence:
      return "full";
  }
  return "unknown";
}

std::vector<DecodeResult> decode_config(const Scorer& scorer, const SweepConfig& config,
                                        const std::vector<SentencePair>& pairs, int workers) {
  std::vector<TokenSeq> sources;
  for (const auto& p : pairs) sources.push_back(p.source);
  std::vector<Policy> policies;
  std::optional<StatusEmbeddings> embeddings;
  DriverFactory factory;
  switch (config.kind) {
    case SweepConfig::Kind::Oracle:
      policies = search_policies(scorer, pairs, config.schedule, workers);
      break;
    case SweepConfig::Kind::GtComparison:
      policies = gt_comparison_policies(scorer, pairs, config.schedule, workers);
      break;
    case SweepConfig::Kind::WaitK:
      if (config.k < 1) usage_error("k must be at least 1");
      for (const auto& p : pairs) {
        policies.push_back(waitk_policy(config.k, length_cap(p.source_length()), p.source_length()));
      }
      break;
    case SweepConfig::Kind::FullSentence:
      for (const auto& p : pairs) policies.push_back(full_sentence_policy(1, p.source_length()));
      break;
    case SweepConfig::Kind::Agent:
      if (!config.agent) usage_error("agent configuration without an agent");
      embeddings = StatusEmbeddings::from(scorer);
      factory = [&](std::size_t) {
        return std::make_unique<AgentDriver>(*config.agent, *embeddings, config.threshold);
      };
      break;
  }
  if (!factory) {
    factory = [&](std::size_t k) { return std::make_unique<PolicyDriver>(policies[k]); };
  }
  return decode_corpus(scorer, sources, factory, workers);
}

std::vector<SweepRow> run_sweep(const Scorer& scorer, const std::vector<SweepConfig>& configs,
                                const std::vector<SentencePair>& pairs,
                                const std::vector<AlignmentSet>* alignments, int workers) {
  if (configs.empty()) usage_error("no sweep configurations");
  if (pairs.empty()) usage_error("empty test set");
  std::vector<SweepRow> rows;
  for (const auto& c : configs) {
    const auto decoded = decode_config(scorer, c, pairs, workers);
    const auto rep = evaluate_decodes(scorer.target_vocab(), pairs, decoded, alignments);
    rows.push_back({c.name(), rep.al, rep.bleu, rep.sufficiency});
  }
  sort_rows(rows);
  return rows;
}

}  // namespace bssimt
