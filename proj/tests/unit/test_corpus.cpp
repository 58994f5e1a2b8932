#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bssimt/corpus.hpp"
#include "bssimt/error.hpp"
#include "test_support.hpp"

using namespace bssimt;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "bssimt_unit";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

Sentence repeat(const std::string& tok, int n) { return Sentence(static_cast<std::size_t>(n), tok); }

}  // namespace

TEST_CASE("vocabulary cutoff collapses rare tokens to unknown") {
  Sentence a = repeat("a", 10), b = repeat("b", 2);
  const auto v = Vocabulary::build({a, b}, 5);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("b"));
  CHECK(v.encode("b") == Vocabulary::kUnk);
  CHECK(v.size() == Vocabulary::kNumSpecials + 1);
}

TEST_CASE("vocabulary without cutoff keeps every token") {
  const auto v = Vocabulary::build({{"x", "y", "z"}}, 0);
  CHECK(v.size() == Vocabulary::kNumSpecials + 3);
}

TEST_CASE("vocabulary cutoff is inclusive at min_freq") {
  const auto v = Vocabulary::build({repeat("a", 4), repeat("b", 5)}, 5);
  CHECK_FALSE(v.contains("a"));
  CHECK(v.contains("b"));
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_WITH_AS(Vocabulary::build({}, 1), "empty corpus", Error);
}

TEST_CASE("vocabulary ids are dense with distinct specials and round trip") {
  const auto v = Vocabulary::build({{"c", "a", "b", "a"}}, 0);
  CHECK(v.decode(Vocabulary::kBos) == "<s>");
  CHECK(v.decode(Vocabulary::kEos) == "</s>");
  CHECK(v.decode(Vocabulary::kUnk) == "<unk>");
  CHECK(v.decode(Vocabulary::kPad) == "<pad>");
  CHECK(v.encode("a") == Vocabulary::kNumSpecials);  // most frequent first
  for (TokenId id = 0; id < static_cast<TokenId>(v.size()); ++id) CHECK(v.encode(v.decode(id)) == id);
  const Sentence s{"a", "b", "c"};
  CHECK(v.decode(v.encode(s)) == s);

  const auto path = temp_file("v.vocab", "");
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
}

TEST_CASE("load_parallel maps unknown tokens, matches line counts, ignores CR") {
  const auto v = Vocabulary::build({{"a", "b"}}, 0);
  const auto s = temp_file("p.src", "a b\nb q\n");
  const auto t = temp_file("p.tgt", "b\na a\n");
  const auto pairs = load_parallel(s, t, v, v);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].source[1] == Vocabulary::kUnk);
  CHECK(pairs[0].target_length() == 1);

  const auto s_crlf = temp_file("p_crlf.src", "a b\r\nb q\r\n");
  const auto t_crlf = temp_file("p_crlf.tgt", "b\r\na a\r\n");
  CHECK(load_parallel(s_crlf, t_crlf, v, v) == pairs);
}

TEST_CASE("load_parallel rejects mismatched files and skips empty lines") {
  const auto v = Vocabulary::build({{"a"}}, 0);
  const auto s = temp_file("m.src", "a\na\n");
  const auto t = temp_file("m.tgt", "a\n");
  try {
    load_parallel(s, t, v, v);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
  const auto s2 = temp_file("e.src", "a\n\na\n");
  const auto t2 = temp_file("e.tgt", "a\na\na\n");
  std::vector<std::string> warnings;
  CHECK(load_parallel(s2, t2, v, v, &warnings).size() == 2);
  CHECK(warnings.size() == 1);
}

TEST_CASE("alignment lines convert to 1-based links") {
  CHECK(parse_alignment_line("0-0 1-2").links == std::vector<std::pair<int, int>>{{1, 1}, {2, 3}});
  CHECK(parse_alignment_line("").links.empty());
  const auto a = parse_alignment_line("3-1 0-1");
  CHECK(a.links == std::vector<std::pair<int, int>>{{1, 2}, {4, 2}});
  CHECK(format_alignment_line(parse_alignment_line("1-2  0-0 1-2")) == "0-0 1-2");
  CHECK(parse_alignment_line(format_alignment_line(a)) == a);
}

TEST_CASE("malformed alignment reports its line") {
  const auto p = temp_file("bad.align", "0-0\n1-x\n");
  CHECK_THROWS_WITH_AS(load_alignments(p), doctest::Contains("line 2"), Error);
}

TEST_CASE("farthest aligned source") {
  CHECK(farthest_aligned_source(AlignmentSet{{{1, 2}, {3, 2}}}, 2) == 3);
  CHECK_FALSE(farthest_aligned_source(AlignmentSet{}, 1).has_value());
  CHECK(farthest_aligned_source(AlignmentSet{{{5, 1}}}, 1) == 5);
}

TEST_CASE("length buckets agree with the histogram") {
  std::vector<SentencePair> pairs{{{1}, {4, 4, 4, 4, 4}}, {{1}, {4, 4, 4, 4, 4}}, {{1}, {4, 4, 4, 4, 4, 4, 4}}};
  CHECK(length_bucket(pairs, 5).size() == 2);
  CHECK(length_bucket(pairs, 100).empty());
  const auto hist = target_length_histogram(pairs);
  for (const auto& [len, count] : hist) CHECK(length_bucket(pairs, len).size() == count);
  CHECK_THROWS_AS(length_bucket(pairs, 0), Error);
}

TEST_CASE("synthetic task obeys its lookahead rule") {
  SyntheticTaskSpec spec;
  spec.lookahead = 2;
  spec.seed = 11;
  const auto pairs = generate_synthetic(spec, 50);
  const auto perm = synthetic_permutation(spec);
  for (const auto& p : pairs) {
    CHECK(p.source_length() >= spec.min_length);
    CHECK(p.source_length() <= spec.max_length);
    REQUIRE(p.target_length() == p.source_length() - spec.lookahead);
    for (int i = 1; i <= p.target_length(); ++i) {
      const int x = p.source[static_cast<std::size_t>(i + spec.lookahead - 1)];
      CHECK(p.target[static_cast<std::size_t>(i - 1)] == perm[static_cast<std::size_t>(x)]);
    }
    const auto a = synthetic_alignment(spec, p);
    CHECK(farthest_aligned_source(a, 1) == 1 + spec.lookahead);
  }
  CHECK(generate_synthetic(spec, 50) == pairs);

  spec.lookahead = 0;
  for (const auto& p : generate_synthetic(spec, 20)) {
    for (int i = 0; i < p.target_length(); ++i) {
      CHECK(p.target[static_cast<std::size_t>(i)] ==
            synthetic_permutation(spec)[static_cast<std::size_t>(p.source[static_cast<std::size_t>(i)])]);
    }
  }
}
