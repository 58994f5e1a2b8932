#include "bssimt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include <json.hpp>

#include "bssimt/error.hpp"
#include "bssimt/parallel.hpp"

namespace bssimt {

LatencyReport average_lagging(const Policy& policy, int source_length, int hypothesis_length) {
  if (hypothesis_length < 1) usage_error("empty hypothesis");
  if (source_length < 1) usage_error("empty source");
  if (policy.length() != hypothesis_length) {
    usage_error("policy length " + std::to_string(policy.length()) +
                " does not match hypothesis length " + std::to_string(hypothesis_length));
  }
  for (int g : policy.reads) {
    if (g < 1 || g > source_length) usage_error("read count outside [1, J]");
  }
  LatencyReport rep;
  rep.r = static_cast<double>(hypothesis_length) / static_cast<double>(source_length);
  rep.tau = hypothesis_length;
  for (int i = 1; i <= hypothesis_length; ++i) {
    if (policy[i] == source_length) {
      rep.tau = i;
      break;
    }
  }
  double sum = 0.0;
  for (int i = 1; i <= rep.tau; ++i) sum += policy[i] - (i - 1) / rep.r;
  rep.al = sum / rep.tau;
  return rep;
}

void BleuStats::add(const Sentence& hyp, const Sentence& ref) {
  hypothesis_length += static_cast<long>(hyp.size());
  reference_length += static_cast<long>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, long> ref_counts;
    for (std::size_t k = 0; k + n <= ref.size(); ++k) {
      ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(k),
                                            ref.begin() + static_cast<std::ptrdiff_t>(k + n))];
    }
    std::map<std::vector<std::string>, long> hyp_counts;
    for (std::size_t k = 0; k + n <= hyp.size(); ++k) {
      ++hyp_counts[std::vector<std::string>(hyp.begin() + static_cast<std::ptrdiff_t>(k),
                                            hyp.begin() + static_cast<std::ptrdiff_t>(k + n))];
    }
    long match = 0, total = 0;
    for (const auto& [gram, c] : hyp_counts) {
      total += c;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) match += std::min(c, it->second);
    }
    matches[n - 1] += match;
    totals[n - 1] += total;
  }
}

double BleuStats::score() const {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (totals[n] == 0 || matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = hypothesis_length >= reference_length
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(reference_length) /
                                             static_cast<double>(hypothesis_length));
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

double corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size()) {
    usage_error("got " + std::to_string(hyps.size()) + " hypotheses for " +
                std::to_string(refs.size()) + " references");
  }
  BleuStats stats;
  for (std::size_t k = 0; k < hyps.size(); ++k) stats.add(hyps[k], refs[k]);
  return stats.score();
}

double sufficiency(const std::vector<Policy>& policies, const std::vector<AlignmentSet>& alignments) {
  if (policies.size() != alignments.size()) {
    usage_error("got " + std::to_string(policies.size()) + " policies for " +
                std::to_string(alignments.size()) + " alignments");
  }
  long hit = 0, total = 0;
  for (std::size_t s = 0; s < policies.size(); ++s) {
    for (int i = 1; i <= policies[s].length(); ++i) {
      const auto far = farthest_aligned_source(alignments[s], i);
      if (!far) continue;
      ++total;
      if (policies[s][i] >= *far) ++hit;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

std::vector<ProfilePoint> probability_profile(const Scorer& scorer,
                                              const std::vector<SentencePair>& bucket,
                                              const std::vector<double>& q_grid, int workers) {
  if (bucket.empty()) usage_error("empty length bucket");
  if (q_grid.empty()) usage_error("empty q grid");
  for (double q : q_grid) {
    if (!(q > 0.0) || q > 1.0) usage_error("q must lie in (0, 1]");
  }
  const int I = bucket.front().target_length();
  for (const auto& p : bucket) {
    if (p.target_length() != I) usage_error("bucket mixes target lengths");
  }
  // values[s] holds one sentence; the reduction runs in index order.
  std::vector<std::vector<double>> values(bucket.size());
  parallel_for(bucket.size(), workers, [&](std::size_t s) {
    const auto& pair = bucket[s];
    const int J = pair.source_length();
    const SourceMemory src = scorer.encode_source(pair.source);
    TargetMemory tgt = scorer.start_target();
    for (int i = 1; i < I; ++i) scorer.append_target(tgt, pair.target[static_cast<std::size_t>(i - 1)]);
    auto& v = values[s];
    for (double q : q_grid) {
      const int g = std::clamp(static_cast<int>(std::ceil(q * J - 1e-9)), 1, J);
      for (int i = 1; i <= I; ++i) {
        const nn::RowVec logp = scorer.predict_log_probs(src, g, tgt, i - 1);
        v.push_back(std::exp(logp(pair.target[static_cast<std::size_t>(i - 1)])));
      }
    }
  });
  std::vector<ProfilePoint> out;
  std::size_t k = 0;
  for (double q : q_grid) {
    for (int i = 1; i <= I; ++i, ++k) {
      double sum = 0.0;
      for (const auto& v : values) sum += v[k];
      out.push_back({q, i, sum / static_cast<double>(bucket.size())});
    }
  }
  return out;
}

void write_profile_csv(std::ostream& out, const std::vector<ProfilePoint>& points) {
  out << "q,i,p\n";
  for (const auto& p : points) {
    out << std::setprecision(6) << p.q << ',' << p.position << ',' << std::setprecision(10)
        << p.probability << '\n';
  }
}

namespace {

DecodeReport evaluate_impl(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                           const std::vector<Policy>& policies, const std::vector<int>& source_lengths,
                           const std::vector<AlignmentSet>* alignments) {
  const std::size_t n = hyps.size();
  if (refs.size() != n || policies.size() != n || source_lengths.size() != n) {
    usage_error("hypothesis, reference, policy and source counts differ");
  }
  DecodeReport rep;
  rep.bleu = corpus_bleu(hyps, refs);
  double al_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (hyps[k].empty()) {
      ++rep.empty_hypotheses;
      continue;
    }
    al_sum += average_lagging(policies[k], source_lengths[k], static_cast<int>(hyps[k].size())).al;
  }
  const std::size_t counted = n - static_cast<std::size_t>(rep.empty_hypotheses);
  rep.al = counted == 0 ? 0.0 : al_sum / static_cast<double>(counted);
  if (alignments) {
    if (alignments->size() != n) usage_error("alignment count differs from corpus size");
    std::vector<Policy> padded(n);
    for (std::size_t k = 0; k < n; ++k) {
      const int I_ref = static_cast<int>(refs[k].size());
      padded[k] = policies[k];
      padded[k].reads.resize(static_cast<std::size_t>(I_ref), source_lengths[k]);
    }
    rep.sufficiency = sufficiency(padded, *alignments);
  }
  return rep;
}

}  // namespace

DecodeReport evaluate_decodes(const Vocabulary& target_vocab, const std::vector<SentencePair>& pairs,
                              const std::vector<DecodeResult>& decoded,
                              const std::vector<AlignmentSet>* alignments) {
  if (pairs.size() != decoded.size()) usage_error("decode count differs from corpus size");
  std::vector<Sentence> hyps, refs;
  std::vector<Policy> policies;
  std::vector<int> lengths;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    hyps.push_back(target_vocab.decode(decoded[k].hypothesis));
    refs.push_back(target_vocab.decode(pairs[k].target));
    policies.push_back(decoded[k].realized_policy);
    lengths.push_back(pairs[k].source_length());
  }
  return evaluate_impl(hyps, refs, policies, lengths, alignments);
}

DecodeReport evaluate_text(const std::vector<Sentence>& hypotheses,
                           const std::vector<Sentence>& references,
                           const std::vector<Policy>& policies, const std::vector<int>& source_lengths,
                           const std::vector<AlignmentSet>* alignments) {
  return evaluate_impl(hypotheses, references, policies, source_lengths, alignments);
}

void sort_rows(std::vector<SweepRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.al < b.al; });
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "config,AL,BLEU,sufficiency\n" << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << r.config << ',' << r.al << ',' << r.bleu << ',';
    if (r.sufficiency) out << *r.sufficiency;
    out << '\n';
  }
  out << std::defaultfloat;
}

void write_sweep_json(std::ostream& out, const std::vector<SweepRow>& rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"config", r.config}, {"AL", r.al}, {"BLEU", r.bleu}};
    row["sufficiency"] = r.sufficiency ? nlohmann::json(*r.sufficiency) : nlohmann::json(nullptr);
    doc.push_back(std::move(row));
  }
  out << doc.dump(2) << '\n';
}

}  // namespace bssimt
