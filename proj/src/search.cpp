#include "bssimt/search.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bssimt/decode.hpp"
#include "bssimt/error.hpp"
#include "bssimt/metrics.hpp"
#include "bssimt/parallel.hpp"

namespace bssimt {

void ProbabilityOracle::probability_batch(std::span<const Probe> probes,
                                          std::span<double> out) const {
  if (probes.size() != out.size()) usage_error("probe and output sizes differ");
  for (std::size_t k = 0; k < probes.size(); ++k) {
    out[k] = probability(probes[k].position, probes[k].read_count);
  }
}

TableOracle::TableOracle(std::vector<std::vector<double>> table) : table_(std::move(table)) {
  if (table_.empty()) usage_error("profile table has no target positions");
  source_length_ = static_cast<int>(table_.front().size());
  if (source_length_ < 1) usage_error("profile table has no read counts");
  for (const auto& row : table_) {
    if (static_cast<int>(row.size()) != source_length_) usage_error("ragged profile table");
  }
}

double TableOracle::probability(int position, int read_count) const {
  if (position < 1 || position > target_length()) usage_error("probe position out of range");
  if (read_count < 1 || read_count > source_length_) usage_error("probe read count out of range");
  ++calls_;
  return table_[static_cast<std::size_t>(position - 1)][static_cast<std::size_t>(read_count - 1)];
}

ScorerOracle::ScorerOracle(const Scorer& scorer, const SentencePair& pair)
    : scorer_(scorer), pair_(pair) {
  if (pair.source.empty() || pair.target.empty()) usage_error("sentence pair sides must be non-empty");
  source_ = scorer.encode_source(pair.source);
  target_ = scorer.start_target();
  for (std::size_t i = 0; i + 1 < pair.target.size(); ++i) scorer.append_target(target_, pair.target[i]);
}

double ScorerOracle::probability(int position, int read_count) const {
  if (position < 1 || position > target_length()) usage_error("probe position out of range");
  const nn::RowVec logp = scorer_.predict_log_probs(source_, read_count, target_, position - 1);
  return std::exp(logp(pair_.target[static_cast<std::size_t>(position - 1)]));
}

namespace {

struct TokenSearch {
  int l = 0, r = 0;
  std::map<int, double> cache;
  TokenTrace trace;

  bool done() const { return l >= r; }
  int mid() const { return (l + r) / 2; }

  void advance() {
    SearchStep s;
    s.l = l;
    s.r = r;
    s.m = mid();
    s.p_l = cache.at(s.l);
    s.p_m = cache.at(s.m);
    s.p_r = cache.at(s.r);
    s.left = s.p_m >= (s.p_l + s.p_r) / 2.0;
    if (s.left) {
      r = s.m;
    } else {
      l = s.m + 1;
    }
    trace.steps.push_back(s);
  }
};

TokenSearch start_token(int position, int l, int r) {
  if (l > r) {
    usage_error("empty search interval [" + std::to_string(l) + ", " + std::to_string(r) + "]");
  }
  TokenSearch t;
  t.l = l;
  t.r = r;
  t.trace.position = position;
  t.trace.l = l;
  t.trace.r = r;
  return t;
}

void check_interval(const ProbabilityOracle& oracle, int l, int r) {
  if (l < 1 || r > oracle.source_length()) {
    usage_error("search interval [" + std::to_string(l) + ", " + std::to_string(r) +
                "] outside [1, " + std::to_string(oracle.source_length()) + "]");
  }
}

SearchResult finish(std::vector<TokenSearch>& tokens) {
  SearchResult out;
  for (auto& t : tokens) {
    t.trace.result = t.l;
    out.raw.push_back(t.l);
    out.trace.tokens.push_back(std::move(t.trace));
  }
  out.policy = monotone_project(out.raw);
  return out;
}

}  // namespace

int binary_search_token(const ProbabilityOracle& oracle, int position, int l, int r,
                        TokenTrace* trace) {
  TokenSearch t = start_token(position, l, r);
  check_interval(oracle, l, r);
  while (!t.done()) {
    for (int g : {t.l, t.mid(), t.r}) {
      if (!t.cache.contains(g)) t.cache.emplace(g, oracle.probability(position, g));
    }
    t.advance();
  }
  t.trace.result = t.l;
  if (trace) *trace = std::move(t.trace);
  return t.l;
}

SearchResult search_policy_sequential(const ProbabilityOracle& oracle,
                                      const IntervalSchedule& schedule) {
  schedule.validate();
  const int I = oracle.target_length(), J = oracle.source_length();
  std::vector<TokenSearch> tokens;
  for (int i = 1; i <= I; ++i) {
    const auto [l, r] = interval_for(schedule, i, J);
    TokenTrace trace;
    binary_search_token(oracle, i, l, r, &trace);
    TokenSearch t;
    t.l = t.r = trace.result;
    t.trace = std::move(trace);
    tokens.push_back(std::move(t));
  }
  return finish(tokens);
}

SearchResult search_policy(const ProbabilityOracle& oracle, const IntervalSchedule& schedule) {
  schedule.validate();
  const int I = oracle.target_length(), J = oracle.source_length();
  std::vector<TokenSearch> tokens;
  tokens.reserve(static_cast<std::size_t>(I));
  for (int i = 1; i <= I; ++i) {
    const auto [l, r] = interval_for(schedule, i, J);
    check_interval(oracle, l, r);
    tokens.push_back(start_token(i, l, r));
  }
  std::vector<Probe> probes;
  std::vector<double> values;
  for (;;) {
    probes.clear();
    for (auto& t : tokens) {
      if (t.done()) continue;
      for (int g : {t.l, t.mid(), t.r}) {
        if (t.cache.contains(g)) continue;
        const Probe p{t.trace.position, g};
        if (std::find_if(probes.begin(), probes.end(), [&](const Probe& q) {
              return q.position == p.position && q.read_count == p.read_count;
            }) == probes.end()) {
          probes.push_back(p);
        }
      }
    }
    if (!probes.empty()) {
      values.assign(probes.size(), 0.0);
      oracle.probability_batch(probes, values);
      for (std::size_t k = 0; k < probes.size(); ++k) {
        tokens[static_cast<std::size_t>(probes[k].position - 1)].cache.emplace(
            probes[k].read_count, values[k]);
      }
    }
    bool active = false;
    for (auto& t : tokens) {
      if (t.done()) continue;
      t.advance();
      active = true;
    }
    if (!active) break;
  }
  return finish(tokens);
}

Policy search_policy(const Scorer& scorer, const SentencePair& pair,
                     const IntervalSchedule& schedule, SearchTrace* trace) {
  const ScorerOracle oracle(scorer, pair);
  SearchResult r = search_policy(oracle, schedule);
  if (trace) *trace = std::move(r.trace);
  return r.policy;
}

std::vector<Policy> search_policies(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                                    const IntervalSchedule& schedule, int workers,
                                    std::vector<SearchTrace>* traces) {
  schedule.validate();
  std::vector<Policy> out(pairs.size());
  if (traces) traces->assign(pairs.size(), {});
  parallel_for(pairs.size(), workers, [&](std::size_t k) {
    out[k] = search_policy(scorer, pairs[k], schedule, traces ? &(*traces)[k] : nullptr);
  });
  return out;
}

void write_search_trace(std::ostream& out, const std::vector<SearchTrace>& traces) {
  const auto old_precision = out.precision(6);
  for (std::size_t s = 0; s < traces.size(); ++s) {
    out << "sentence " << s + 1 << '\n';
    for (const auto& t : traces[s].tokens) {
      out << "  token " << t.position << " interval [" << t.l << ", " << t.r << "] -> " << t.result
          << '\n';
      for (const auto& st : t.steps) {
        out << "    [" << st.l << ", " << st.r << "] m=" << st.m << " p_l=" << st.p_l
            << " p_m=" << st.p_m << " p_r=" << st.p_r << ' ' << (st.left ? "left" : "right")
            << '\n';
      }
    }
  }
  out.precision(old_precision);
}

Policy gt_comparison_policy(const Scorer& scorer, const SentencePair& pair,
                            const IntervalSchedule& schedule) {
  schedule.validate();
  const int I = pair.target_length(), J = pair.source_length();
  const SourceMemory source = scorer.encode_source(pair.source);
  TargetMemory target = scorer.start_target();
  std::vector<int> raw;
  for (int i = 1; i <= I; ++i) {
    const auto [l, r] = interval_for(schedule, i, J);
    int chosen = r;
    for (int j = l; j <= r; ++j) {
      if (argmax_token(scorer.predict_log_probs(source, j, target, i - 1)) ==
          pair.target[static_cast<std::size_t>(i - 1)]) {
        chosen = j;
        break;
      }
    }
    raw.push_back(chosen);
    if (i < I) scorer.append_target(target, pair.target[static_cast<std::size_t>(i - 1)]);
  }
  return monotone_project(raw);
}

std::vector<Policy> gt_comparison_policies(const Scorer& scorer,
                                           const std::vector<SentencePair>& pairs,
                                           const IntervalSchedule& schedule, int workers) {
  std::vector<Policy> out(pairs.size());
  parallel_for(pairs.size(), workers,
               [&](std::size_t k) { out[k] = gt_comparison_policy(scorer, pairs[k], schedule); });
  return out;
}

OracleEvaluation evaluate_oracle_policy(const Scorer& scorer, const std::vector<SentencePair>& pairs,
                                        const IntervalSchedule& schedule, int workers) {
  OracleEvaluation out;
  out.policies = search_policies(scorer, pairs, schedule, workers);
  std::vector<DecodeResult> decoded(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t k) {
    decoded[k] = oracle_decode(scorer, out.policies[k], pairs[k].source);
  });
  const auto report = evaluate_decodes(scorer.target_vocab(), pairs, decoded, nullptr);
  out.bleu = report.bleu;
  out.al = report.al;
  return out;
}

AlternateResult alternate_train(const Scorer& initial, const std::vector<SentencePair>& train,
                                const std::vector<SentencePair>& dev,
                                const AlternateOptions& options) {
  if (options.rounds < 1) usage_error("rounds must be at least 1");
  if (train.empty()) usage_error("training corpus is empty");
  if (dev.empty()) usage_error("held-out corpus is empty");
  const int workers = options.training.workers;
  Scorer current = initial;
  AlternateResult result{initial, 0, {}, {}};
  double best_bleu = -1.0;
  for (int round = 1; round <= options.rounds; ++round) {
    const auto policies = search_policies(current, train, options.schedule, workers);
    TrainSchedule ts = options.training;
    ts.seed = splitmix64(options.training.seed + static_cast<std::uint64_t>(round));
    train_policy_ce(current, train, policies, ts);
    const double bleu = evaluate_oracle_policy(current, dev, options.schedule, workers).bleu;
    result.dev_bleu.push_back(bleu);
    if (bleu > best_bleu) {
      best_bleu = bleu;
      result.best = current;
      result.best_round = round;
    }
  }
  result.policies = search_policies(result.best, train, options.schedule, workers);
  return result;
}

}  // namespace bssimt
