#include "bssimt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bssimt/error.hpp"
#include "bssimt/rng.hpp"

namespace bssimt {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"<s>", "</s>", "<unk>", "<pad>"};
  return specials;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot write " + path.string());
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

Sentence split_ws(const std::string& line) {
  Sentence out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(from_tokens(special_tokens())) {}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_freq) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    data_error("vocabulary must start with the special tokens");
  }
  Vocabulary v{Empty{}};
  v.min_freq_ = min_freq;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i));
    if (!inserted) data_error("duplicate vocabulary entry '" + v.tokens_[i] + "'");
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<Sentence>& sentences, int min_freq) {
  if (sentences.empty()) data_error("empty corpus");
  if (min_freq < 0) usage_error("min_freq must be non-negative");
  std::unordered_map<std::string, long> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> kept;
  const auto& specials = special_tokens();
  for (auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (std::find(specials.begin(), specials.end(), tok) != specials.end()) continue;
    kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens = specials;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens), min_freq);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines.front().rfind("#vocab", 0) != 0) {
    data_error(path.string() + ": not a vocabulary file");
  }
  int min_freq = 0;
  {
    std::istringstream header(lines.front());
    std::string tag, key;
    header >> tag >> key >> min_freq;
  }
  std::vector<std::string> tokens;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    tokens.push_back(lines[i]);
  }
  return from_tokens(std::move(tokens), min_freq);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "#vocab min_freq " << min_freq_ << '\n';
  for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocabulary::encode(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

TokenSeq Vocabulary::encode(const Sentence& tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocabulary::decode(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    usage_error("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Sentence Vocabulary::decode(const TokenSeq& ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(decode(id));
  return out;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::vector<Sentence> read_tokenized_lines(const std::filesystem::path& path) {
  std::vector<Sentence> out;
  for (const auto& line : read_lines(path)) out.push_back(split_ws(line));
  return out;
}

std::vector<SentencePair> load_parallel(const std::filesystem::path& source_path,
                                        const std::filesystem::path& target_path,
                                        const Vocabulary& source_vocab,
                                        const Vocabulary& target_vocab,
                                        std::vector<std::string>* warnings) {
  auto src = read_tokenized_lines(source_path);
  auto tgt = read_tokenized_lines(target_path);
  if (src.size() != tgt.size()) {
    data_error("line count mismatch: " + source_path.string() + " has " +
               std::to_string(src.size()) + " lines, " + target_path.string() +
               " has " + std::to_string(tgt.size()));
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty() || tgt[i].empty()) {
      if (warnings) warnings->push_back("line " + std::to_string(i + 1) + ": empty, skipped");
      continue;
    }
    pairs.push_back({source_vocab.encode(src[i]), target_vocab.encode(tgt[i])});
  }
  return pairs;
}

AlignmentSet parse_alignment_line(std::string_view line, std::size_t line_number) {
  AlignmentSet out;
  std::istringstream ss{std::string(line)};
  std::string item;
  while (ss >> item) {
    const auto dash = item.find('-');
    bool ok = dash != std::string::npos && dash > 0 && dash + 1 < item.size();
    long s = 0, t = 0;
    if (ok) {
      try {
        std::size_t used_s = 0, used_t = 0;
        const std::string a = item.substr(0, dash), b = item.substr(dash + 1);
        s = std::stol(a, &used_s);
        t = std::stol(b, &used_t);
        ok = used_s == a.size() && used_t == b.size() && s >= 0 && t >= 0;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      data_error("line " + std::to_string(line_number) + ": malformed alignment '" + item + "'");
    }
    out.links.emplace_back(static_cast<int>(s) + 1, static_cast<int>(t) + 1);
  }
  std::sort(out.links.begin(), out.links.end());
  out.links.erase(std::unique(out.links.begin(), out.links.end()), out.links.end());
  return out;
}

std::string format_alignment_line(const AlignmentSet& alignment) {
  std::string out;
  for (const auto& [s, t] : alignment.links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(s - 1) + '-' + std::to_string(t - 1);
  }
  return out;
}

std::vector<AlignmentSet> load_alignments(const std::filesystem::path& path) {
  std::vector<AlignmentSet> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.push_back(parse_alignment_line(lines[i], i + 1));
  }
  return out;
}

void save_alignments(const std::filesystem::path& path,
                     const std::vector<AlignmentSet>& alignments) {
  auto out = open_output(path);
  for (const auto& a : alignments) out << format_alignment_line(a) << '\n';
}

std::optional<int> farthest_aligned_source(const AlignmentSet& alignment, int i) {
  std::optional<int> best;
  for (const auto& [s, t] : alignment.links) {
    if (t == i && (!best || s > *best)) best = s;
  }
  return best;
}

std::vector<SentencePair> length_bucket(const std::vector<SentencePair>& pairs,
                                        int target_len) {
  if (target_len < 1) usage_error("target length must be at least 1");
  std::vector<SentencePair> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [&](const SentencePair& p) { return p.target_length() == target_len; });
  return out;
}

std::map<int, std::size_t> target_length_histogram(const std::vector<SentencePair>& pairs) {
  std::map<int, std::size_t> hist;
  for (const auto& p : pairs) ++hist[p.target_length()];
  return hist;
}

namespace {

void validate(const SyntheticTaskSpec& spec) {
  if (spec.vocab_size < 2) usage_error("synthetic vocab_size must be at least 2");
  if (spec.lookahead < 0) usage_error("synthetic lookahead must be non-negative");
  if (spec.min_length > spec.max_length) usage_error("synthetic min_length > max_length");
  if (spec.min_length < spec.lookahead + 1) {
    usage_error("synthetic min_length must exceed the lookahead");
  }
}

}  // namespace

std::vector<int> synthetic_permutation(const SyntheticTaskSpec& spec) {
  validate(spec);
  std::vector<int> perm(static_cast<std::size_t>(spec.vocab_size));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::substream(spec.seed, "synthetic-permutation");
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return perm;
}

std::vector<SentencePair> generate_synthetic(const SyntheticTaskSpec& spec, std::size_t n) {
  if (n < 1) usage_error("synthetic corpus size must be at least 1");
  const auto perm = synthetic_permutation(spec);
  Rng rng = Rng::substream(spec.seed, "synthetic-sentences");
  std::vector<SentencePair> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int J = rng.uniform_int(spec.min_length, spec.max_length);
    SentencePair p;
    p.source.resize(static_cast<std::size_t>(J));
    for (auto& x : p.source) x = rng.uniform_int(0, spec.vocab_size - 1);
    const int I = J - spec.lookahead;
    p.target.resize(static_cast<std::size_t>(I));
    for (int i = 1; i <= I; ++i) {
      p.target[static_cast<std::size_t>(i - 1)] =
          perm[static_cast<std::size_t>(p.source[static_cast<std::size_t>(i + spec.lookahead - 1)])];
    }
    out.push_back(std::move(p));
  }
  return out;
}

Sentence synthetic_source_text(const TokenSeq& symbols) {
  Sentence out;
  for (TokenId s : symbols) out.push_back("s" + std::to_string(s));
  return out;
}

Sentence synthetic_target_text(const TokenSeq& symbols) {
  Sentence out;
  for (TokenId s : symbols) out.push_back("t" + std::to_string(s));
  return out;
}

AlignmentSet synthetic_alignment(const SyntheticTaskSpec& spec, const SentencePair& pair) {
  AlignmentSet a;
  for (int i = 1; i <= pair.target_length(); ++i) a.links.emplace_back(i + spec.lookahead, i);
  return a;
}

}  // namespace bssimt
