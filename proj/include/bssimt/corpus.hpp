#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bssimt {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using Sentence = std::vector<std::string>;

/// Token <-> id map. Ids are dense; the four specials occupy ids 0..3 and
/// every other token is ordered by descending corpus frequency, then
/// lexicographically.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kPad = 3;
  static constexpr int kNumSpecials = 4;

  Vocabulary();

  /// Tokens whose frequency is below `min_freq` are left out and therefore
  /// encode to the unknown id.
  static Vocabulary build(const std::vector<Sentence>& sentences, int min_freq);

  /// Rebuilds a vocabulary from its ordered token list (specials first).
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_freq = 0);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId encode(std::string_view token) const;
  TokenSeq encode(const Sentence& tokens) const;
  const std::string& decode(TokenId id) const;
  Sentence decode(const TokenSeq& ids) const;

  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  int min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  struct Empty {};
  explicit Vocabulary(Empty) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  int min_freq_ = 0;
};

/// Source and target ids without sentinels.
struct SentencePair {
  TokenSeq source;
  TokenSeq target;

  int source_length() const { return static_cast<int>(source.size()); }
  int target_length() const { return static_cast<int>(target.size()); }

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

/// Word alignment links as 1-based (source, target) pairs, sorted and unique.
struct AlignmentSet {
  std::vector<std::pair<int, int>> links;

  friend bool operator==(const AlignmentSet&, const AlignmentSet&) = default;
};

/// Splits a file into whitespace-tokenized lines. CR before LF is dropped.
std::vector<Sentence> read_tokenized_lines(const std::filesystem::path& path);

/// Line-aligned parallel text. Lines where either side is empty are skipped
/// and reported through `warnings`.
std::vector<SentencePair> load_parallel(const std::filesystem::path& source_path,
                                        const std::filesystem::path& target_path,
                                        const Vocabulary& source_vocab,
                                        const Vocabulary& target_vocab,
                                        std::vector<std::string>* warnings = nullptr);

/// Parses one Pharaoh line ("i-j" pairs, 0-based source-target).
AlignmentSet parse_alignment_line(std::string_view line, std::size_t line_number = 1);
std::string format_alignment_line(const AlignmentSet& alignment);
std::vector<AlignmentSet> load_alignments(const std::filesystem::path& path);
void save_alignments(const std::filesystem::path& path,
                     const std::vector<AlignmentSet>& alignments);

/// Largest source index linked to target index i, if any.
std::optional<int> farthest_aligned_source(const AlignmentSet& alignment, int i);

std::vector<SentencePair> length_bucket(const std::vector<SentencePair>& pairs,
                                        int target_len);
std::map<int, std::size_t> target_length_histogram(const std::vector<SentencePair>& pairs);

/// Desk-scale lookahead task. A source of length J over symbols
/// [0, vocab_size) yields a target of length J - lookahead with
/// y_i = perm(x_{i + lookahead}), so token i needs exactly i + lookahead
/// source tokens.
struct SyntheticTaskSpec {
  int vocab_size = 32;
  int min_length = 8;
  int max_length = 20;
  int lookahead = 2;
  std::uint64_t seed = 1;
};

/// Symbol permutation used by the task with this seed.
std::vector<int> synthetic_permutation(const SyntheticTaskSpec& spec);

/// Pairs over raw symbol ids (not vocabulary ids).
std::vector<SentencePair> generate_synthetic(const SyntheticTaskSpec& spec, std::size_t n);

/// Textual forms: source symbol k is "s<k>", target symbol k is "t<k>".
Sentence synthetic_source_text(const TokenSeq& symbols);
Sentence synthetic_target_text(const TokenSeq& symbols);

/// Gold alignment of the task: target i links to source i + lookahead.
AlignmentSet synthetic_alignment(const SyntheticTaskSpec& spec, const SentencePair& pair);

}  // namespace bssimt
