#include <doctest.h>

#include <cmath>
#include <limits>

#include "bssimt/error.hpp"
#include "bssimt/train.hpp"
#include "test_support.hpp"

using namespace bssimt;
using bssimt::testing::encode_synthetic;
using bssimt::testing::synthetic_vocabs;
using bssimt::testing::tiny_config;

namespace {

std::vector<SentencePair> small_task(std::size_t n, int symbols = 6) {
  SyntheticTaskSpec spec;
  spec.vocab_size = symbols;
  spec.min_length = 4;
  spec.max_length = 7;
  spec.lookahead = 1;
  auto [vs, vt] = synthetic_vocabs(symbols);
  return encode_synthetic(generate_synthetic(spec, n), vs, vt);
}

TrainSchedule quick(int epochs) {
  TrainSchedule s;
  s.epochs = epochs;
  s.batch_size = 4;
  s.learning_rate = 1e-2;
  s.warmup_steps = 5;
  return s;
}

bool same_params(const Scorer& a, const Scorer& b) {
  return std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin(),
                    b.parameters().end());
}

}  // namespace

TEST_CASE("sample_k is uniform over 1..J") {
  Rng rng(99);
  const int J = 10, n = 10000;
  std::vector<int> counts(J + 1, 0);
  for (int t = 0; t < n; ++t) {
    const int k = sample_k(rng, J);
    REQUIRE(k >= 1);
    REQUIRE(k <= J);
    ++counts[static_cast<std::size_t>(k)];
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / J;
  for (int k = 1; k <= J; ++k) chi2 += std::pow(counts[static_cast<std::size_t>(k)] - expected, 2) / expected;
  CHECK(chi2 < 21.666);  // chi-square, 9 degrees of freedom, alpha 0.01
  CHECK(sample_k(rng, 1) == 1);
}

TEST_CASE("learning rate warms up linearly then decays") {
  TrainSchedule s;
  s.learning_rate = 1e-3;
  s.warmup_steps = 100;
  AdamOptimizer opt(3, s);
  CHECK(opt.rate(1) == doctest::Approx(1e-5));
  CHECK(opt.rate(50) == doctest::Approx(5e-4));
  CHECK(opt.rate(100) == doctest::Approx(1e-3));
  CHECK(opt.rate(400) == doctest::Approx(5e-4));
}

TEST_CASE("gradient clipping") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_gradient(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> small{0.1, 0.0};
  clip_gradient(small, 1.0);
  CHECK(small[0] == 0.1);
  std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(clip_gradient(bad, 1.0), Error);
}

TEST_CASE("training lowers the loss on a tiny corpus") {
  const auto pairs = small_task(8);
  auto [vs, vt] = synthetic_vocabs(6);
  Scorer s(tiny_config(), vs, vt, 3);
  std::vector<Policy> full;
  for (const auto& p : pairs) full.push_back(full_sentence_policy(p.target_length(), p.source_length()));
  const double before = evaluate_policy_ce(s, pairs, full);
  const auto report = train_full_sentence(s, pairs, quick(50));
  CHECK(report.steps == 100);
  CHECK(s.metadata().steps == 100);
  CHECK(s.metadata().objective == "full-sentence");
  const double after = evaluate_policy_ce(s, pairs, full);
  CHECK(after < 0.5 * before);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
}

TEST_CASE("fixed k multi-path equals wait-k policy training") {
  const auto pairs = small_task(10);
  auto [vs, vt] = synthetic_vocabs(6);
  Scorer a(tiny_config(), vs, vt, 5), b = a;
  train_multipath(a, pairs, quick(2), 2);
  std::vector<Policy> waitk;
  for (const auto& p : pairs) waitk.push_back(waitk_policy(2, p.target_length(), p.source_length()));
  train_policy_ce(b, pairs, waitk, quick(2));
  CHECK(same_params(a, b));
}

TEST_CASE("repeated training is bit-identical") {
  const auto pairs = small_task(10);
  auto [vs, vt] = synthetic_vocabs(6);
  auto config = tiny_config();
  config.dropout = 0.1;
  Scorer a(config, vs, vt, 5), b(config, vs, vt, 5);
  train_multipath(a, pairs, quick(2));
  train_multipath(b, pairs, quick(2));
  CHECK(same_params(a, b));
}

TEST_CASE("results do not depend on the worker count") {
  const auto pairs = small_task(12);
  auto [vs, vt] = synthetic_vocabs(6);
  auto config = tiny_config();
  config.dropout = 0.1;
  Scorer a(config, vs, vt, 8), b = a;
  auto sched = quick(2);
  train_multipath(a, pairs, sched);
  sched.workers = 3;
  train_multipath(b, pairs, sched);
  CHECK(same_params(a, b));
}

TEST_CASE("max_steps caps training") {
  const auto pairs = small_task(12);
  Scorer s = bssimt::testing::tiny_scorer();
  auto sched = quick(5);
  sched.max_steps = 4;
  CHECK(train_multipath(s, pairs, sched).steps == 4);
}

TEST_CASE("training rejects inconsistent inputs") {
  const auto pairs = small_task(4);
  Scorer s = bssimt::testing::tiny_scorer();
  std::vector<Policy> policies;
  for (const auto& p : pairs) policies.push_back(full_sentence_policy(p.target_length(), p.source_length()));
  auto shorter = policies;
  shorter[1].reads.pop_back();
  CHECK_THROWS_AS(train_policy_ce(s, pairs, shorter, quick(1)), Error);
  auto too_far = policies;
  too_far[0].reads.back() = pairs[0].source_length() + 1;
  CHECK_THROWS_AS(train_policy_ce(s, pairs, too_far, quick(1)), Error);
  CHECK_THROWS_AS(train_policy_ce(s, pairs, {policies[0]}, quick(1)), Error);
  auto bad = quick(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train_policy_ce(s, pairs, policies, bad), Error);
}

TEST_CASE("non-finite loss is a numeric error") {
  const auto pairs = small_task(4);
  Scorer s = bssimt::testing::tiny_scorer();
  for (auto& v : s.mutable_parameters()) v = std::numeric_limits<double>::quiet_NaN();
  try {
    train_full_sentence(s, pairs, quick(1));
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}
