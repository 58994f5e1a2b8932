#include <doctest.h>

#include <filesystem>

#include "bssimt/actions.hpp"
#include "bssimt/error.hpp"
#include "bssimt/policy.hpp"
#include "bssimt/rng.hpp"

using namespace bssimt;

namespace {

ActionSequence acts(std::string_view s) { return parse_actions(s); }

Policy random_monotone(Rng& rng, int I, int J) {
  std::vector<int> raw;
  for (int i = 0; i < I; ++i) raw.push_back(rng.uniform_int(1, J));
  return monotone_project(raw);
}

}  // namespace

TEST_CASE("interval schedule shifts and clamps") {
  const IntervalSchedule s{3, 7};
  CHECK(interval_for(s, 1, 20) == std::pair{3, 7});
  CHECK(interval_for(s, 2, 20) == std::pair{4, 8});
  CHECK(interval_for(IntervalSchedule{5, 9}, 10, 12) == std::pair{12, 12});
  CHECK_THROWS_AS(IntervalSchedule({4, 3}).validate(), Error);
  CHECK_THROWS_AS(IntervalSchedule({0, 3}).validate(), Error);
}

TEST_CASE("wait-k policies") {
  CHECK(waitk_policy(3, 4, 5).reads == std::vector<int>{3, 4, 5, 5});
  CHECK(waitk_policy(9, 3, 5) == full_sentence_policy(3, 5));
  CHECK_THROWS_AS(waitk_policy(0, 3, 5), Error);
}

TEST_CASE("monotone projection is the running maximum") {
  CHECK(monotone_project(std::vector<int>{4, 2, 5}).reads == std::vector<int>{4, 4, 5});
  CHECK(monotone_project(std::vector<int>{1, 2, 3}).reads == std::vector<int>{1, 2, 3});
  CHECK(monotone_project(std::vector<int>{5, 1, 1}).reads == std::vector<int>{5, 5, 5});
}

TEST_CASE("policy text round trip") {
  const Policy p{{2, 3, 3, 7}};
  CHECK(format_policy(p) == "2 3 3 7");
  CHECK(parse_policy("2 3  3 7") == p);
  CHECK_THROWS_AS(parse_policy("2 x"), Error);
  const auto path = std::filesystem::temp_directory_path() / "bssimt_policies.txt";
  save_policies(path, {p, Policy{{1}}});
  CHECK(load_policies(path) == std::vector<Policy>{p, Policy{{1}}});
  CHECK(mean_lag(Policy{{2, 3, 4}}) == doctest::Approx(1.0));
}

TEST_CASE("policy to actions worked examples") {
  CHECK(format_actions(policy_to_actions(Policy{{1, 2, 3}}, 3)) == "RWRWRW");
  CHECK(format_actions(policy_to_actions(Policy{{3, 3}}, 3)) == "RRRWW");
  CHECK(format_actions(policy_to_actions(Policy{{1, 1}}, 3)) == "RWWRR");
  CHECK_THROWS_AS(policy_to_actions(Policy{{2, 1}}, 3), Error);
  CHECK_THROWS_AS(policy_to_actions(Policy{{4}}, 3), Error);
}

TEST_CASE("actions to policy") {
  CHECK(actions_to_policy(acts("RWRWRW")).reads == std::vector<int>{1, 2, 3});
  CHECK(actions_to_policy(acts("RRW")).reads == std::vector<int>{2});
  CHECK_THROWS_AS(actions_to_policy(acts("RRR")), Error);
}

TEST_CASE("action validation") {
  CHECK_NOTHROW(validate_actions(acts("RW"), 1, 1));
  CHECK_THROWS_AS(validate_actions(acts("RWW"), 1, 1), Error);
  CHECK_THROWS_AS(validate_actions(acts("WR"), 1, 1), Error);
  CHECK_THROWS_AS(parse_actions("RXW"), Error);
}

TEST_CASE("action round trip over random monotone policies") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int J = rng.uniform_int(1, 25), I = rng.uniform_int(1, 25);
    const Policy g = random_monotone(rng, I, J);
    const auto a = policy_to_actions(g, J);
    CHECK(static_cast<int>(a.size()) == I + J);
    CHECK_NOTHROW(validate_actions(a, I, J));
    CHECK(actions_to_policy(a) == g);
    CHECK(parse_actions(format_actions(a)) == a);
  }
}
