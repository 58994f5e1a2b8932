#include <doctest.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "bssimt/error.hpp"
#include "bssimt/search.hpp"
#include "test_support.hpp"

using namespace bssimt;
using bssimt::testing::random_pair;
using bssimt::testing::reference_search;
using bssimt::testing::tiny_scorer;

namespace {

TableOracle one_row(std::vector<double> row) { return TableOracle({std::move(row)}); }

std::vector<double> random_profile(Rng& rng, int J) {
  std::vector<double> p;
  for (int j = 0; j < J; ++j) p.push_back(rng.uniform());
  return p;
}

}  // namespace

TEST_CASE("hand-built profiles") {
  CHECK(binary_search_token(one_row({0, 0, 0, 1, 1}), 1, 1, 5) == 4);
  CHECK(binary_search_token(one_row({0.3, 0.3, 0.3, 0.3, 0.3}), 1, 1, 5) == 1);
  CHECK(binary_search_token(one_row({0.2, 0.5, 0.7, 0.8, 0.85}), 1, 1, 5) == 2);
  CHECK(binary_search_token(one_row({0.9, 0.1, 0.2}), 1, 2, 2) == 2);
}

TEST_CASE("trace records every halving") {
  TokenTrace trace;
  const int g = binary_search_token(one_row({0, 0, 0, 1, 1}), 1, 1, 5, &trace);
  CHECK(g == 4);
  CHECK(trace.l == 1);
  CHECK(trace.r == 5);
  CHECK(trace.result == 4);
  REQUIRE(trace.steps.size() == 2u);
  CHECK(trace.steps[0].m == 3);
  CHECK_FALSE(trace.steps[0].left);
  CHECK(trace.steps[1].l == 4);
  CHECK(trace.steps[1].m == 4);
  CHECK(trace.steps[1].r == 5);
  CHECK(trace.steps[1].left);
}

TEST_CASE("random profiles agree with the recursive rule within the step bound") {
  Rng rng(2024);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 1000; ++t) {
    const int J = rng.uniform_int(1, 64);
    const auto profile = random_profile(rng, J);
    const int l = rng.uniform_int(1, J), r = rng.uniform_int(l, J);
    int depth = 0;
    const int expected = reference_search(profile, l, r, &depth);
    TokenTrace trace;
    const auto oracle = one_row(profile);
    REQUIRE(binary_search_token(oracle, 1, l, r, &trace) == expected);
    const int width = r - l + 1;
    const int bound = static_cast<int>(std::ceil(std::log2(width))) + 1;
    CHECK(static_cast<int>(trace.steps.size()) <= bound);
    CHECK(oracle.calls() <= 3L * bound);
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("interval endpoints are rejected when reversed or out of range") {
  const auto oracle = one_row({0.1, 0.2, 0.3});
  CHECK_THROWS_AS(binary_search_token(oracle, 1, 3, 2), Error);
  CHECK_THROWS_AS(binary_search_token(oracle, 1, 0, 2), Error);
  CHECK_THROWS_AS(binary_search_token(oracle, 1, 1, 4), Error);
  CHECK_THROWS_AS(binary_search_token(oracle, 2, 1, 2), Error);
  CHECK_THROWS_AS(TableOracle({{0.1, 0.2}, {0.1}}), Error);
}

TEST_CASE("lockstep and sequential search agree on tables") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int J = rng.uniform_int(1, 20), I = rng.uniform_int(1, 20);
    std::vector<std::vector<double>> table;
    for (int i = 0; i < I; ++i) table.push_back(random_profile(rng, J));
    const TableOracle oracle(table);
    const IntervalSchedule sched{rng.uniform_int(1, 4), 0};
    IntervalSchedule s = sched;
    s.r1 = s.l1 + rng.uniform_int(0, 5);
    const auto a = search_policy(oracle, s);
    const auto b = search_policy_sequential(oracle, s);
    REQUIRE(a.raw == b.raw);
    CHECK(a.policy == b.policy);
    CHECK(a.policy == monotone_project(a.raw));
    for (int i = 1; i <= I; ++i) {
      const auto [l, r] = interval_for(s, i, J);
      const int g = a.raw[static_cast<std::size_t>(i - 1)];
      CHECK(g >= l);
      CHECK(g <= r);
      CHECK(g == reference_search(table[static_cast<std::size_t>(i - 1)], l, r));
    }
    validate_policy(a.policy, J);
  }
}

TEST_CASE("scorer-backed search matches a table of scorer probabilities") {
  const Scorer s = tiny_scorer(31);
  Rng rng(6);
  const int V = static_cast<int>(s.source_vocab().size());
  for (int t = 0; t < 10; ++t) {
    const auto pair = random_pair(rng, rng.uniform_int(3, 9), rng.uniform_int(1, 8), V);
    std::vector<std::vector<double>> table;
    for (int i = 1; i <= pair.target_length(); ++i) {
      std::vector<double> row;
      for (int g = 1; g <= pair.source_length(); ++g) {
        TokenSeq prefix{Vocabulary::kBos};
        prefix.insert(prefix.end(), pair.target.begin(), pair.target.begin() + (i - 1));
        const auto d = s.score_prefix({pair.source, prefix, g});
        row.push_back(d[static_cast<std::size_t>(pair.target[static_cast<std::size_t>(i - 1)])]);
      }
      table.push_back(row);
    }
    const ScorerOracle oracle(s, pair);
    for (int i = 1; i <= pair.target_length(); ++i) {
      for (int g = 1; g <= pair.source_length(); ++g) {
        CHECK(oracle.probability(i, g) ==
              doctest::Approx(table[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(g - 1)]).epsilon(1e-12));
      }
    }
    const IntervalSchedule sched{2, 5};
    SearchTrace trace;
    const Policy p = search_policy(s, pair, sched, &trace);
    CHECK(p == search_policy_sequential(TableOracle(table), sched).policy);
    CHECK(trace.tokens.size() == static_cast<std::size_t>(pair.target_length()));
  }
}

TEST_CASE("batched corpus search is independent of workers") {
  const Scorer s = tiny_scorer(4);
  Rng rng(7);
  std::vector<SentencePair> pairs;
  for (int k = 0; k < 9; ++k) pairs.push_back(random_pair(rng, rng.uniform_int(2, 8), rng.uniform_int(1, 8), 10));
  const IntervalSchedule sched{1, 4};
  std::vector<SearchTrace> traces;
  const auto a = search_policies(s, pairs, sched, 1, &traces);
  const auto b = search_policies(s, pairs, sched, 3);
  CHECK(a == b);
  for (std::size_t k = 0; k < pairs.size(); ++k) CHECK(a[k] == search_policy(s, pairs[k], sched));
  std::ostringstream out;
  write_search_trace(out, traces);
  CHECK_FALSE(out.str().empty());
}

TEST_CASE("ground-truth comparison policies stay inside the interval") {
  const Scorer s = tiny_scorer(10);
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto pair = random_pair(rng, rng.uniform_int(2, 8), rng.uniform_int(1, 8), 10);
    const IntervalSchedule sched{2, 4};
    const Policy p = gt_comparison_policy(s, pair, sched);
    validate_policy(p, pair.source_length());
    REQUIRE(p.length() == pair.target_length());
    for (int i = 1; i <= p.length(); ++i) {
      CHECK(p[i] >= interval_for(sched, i, pair.source_length()).first);
    }
  }
}
