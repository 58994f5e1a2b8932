#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bssimt/corpus.hpp"
#include "bssimt/decode.hpp"
#include "bssimt/model.hpp"
#include "bssimt/policy.hpp"

namespace bssimt {

struct LatencyReport {
  double al = 0.0;
  int tau = 0;
  double r = 0.0;  // hypothesis length / source length
};

/// Average Lagging of a policy over a hypothesis of length `hypothesis_length`
/// (the policy must have that length).
LatencyReport average_lagging(const Policy& policy, int source_length, int hypothesis_length);

struct BleuStats {
  std::vector<long> matches = std::vector<long>(4, 0);
  std::vector<long> totals = std::vector<long>(4, 0);
  long hypothesis_length = 0;
  long reference_length = 0;

  void add(const Sentence& hypothesis, const Sentence& reference);
  double score() const;  // percentage
};

/// Corpus 4-gram BLEU with brevity penalty and no smoothing.
double corpus_bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// Fraction of aligned target tokens with g_i >= farthest aligned source
/// position. Unaligned target tokens are skipped. Returns 1 when no token of
/// the corpus is aligned.
double sufficiency(const std::vector<Policy>& policies, const std::vector<AlignmentSet>& alignments);

struct ProfilePoint {
  double q = 0.0;
  int position = 0;
  double probability = 0.0;
};

/// Mean teacher-forced probability of y_i with ceil(q J) source tokens
/// visible, for every q in the grid and target position i of the bucket.
std::vector<ProfilePoint> probability_profile(const Scorer& scorer,
                                              const std::vector<SentencePair>& bucket,
                                              const std::vector<double>& q_grid, int workers = 1);

void write_profile_csv(std::ostream& out, const std::vector<ProfilePoint>& points);

struct DecodeReport {
  double al = 0.0;    // mean sentence AL over non-empty hypotheses
  double bleu = 0.0;
  std::optional<double> sufficiency;
  int empty_hypotheses = 0;
};

/// Realized policies are padded with J up to the reference length (and
/// truncated beyond it) before the sufficiency comparison.
DecodeReport evaluate_decodes(const Vocabulary& target_vocab, const std::vector<SentencePair>& pairs,
                              const std::vector<DecodeResult>& decoded,
                              const std::vector<AlignmentSet>* alignments);

/// Same measurement from plain files. Hypotheses and references arrive as
/// token strings; latency comes from the realized policies and source lengths.
DecodeReport evaluate_text(const std::vector<Sentence>& hypotheses,
                           const std::vector<Sentence>& references,
                           const std::vector<Policy>& policies, const std::vector<int>& source_lengths,
                           const std::vector<AlignmentSet>* alignments);

struct SweepRow {
  std::string config;
  double al = 0.0;
  double bleu = 0.0;
  std::optional<double> sufficiency;
};

/// Rows sorted by AL (stable). The CSV rounds to two decimals; the JSON
/// sidecar keeps full precision.
void sort_rows(std::vector<SweepRow>& rows);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_json(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace bssimt
