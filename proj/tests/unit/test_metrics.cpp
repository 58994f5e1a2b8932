#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "bssimt/error.hpp"
#include "bssimt/metrics.hpp"
#include "bssimt/sweep.hpp"
#include "test_support.hpp"

using namespace bssimt;
using bssimt::testing::random_pair;
using bssimt::testing::tiny_scorer;

namespace {

double reference_al(const std::vector<int>& g, int J) {
  const int I = static_cast<int>(g.size());
  int tau = I;
  for (int i = 0; i < I; ++i) {
    if (g[static_cast<std::size_t>(i)] == J) {
      tau = i + 1;
      break;
    }
  }
  double s = 0.0;
  for (int i = 0; i < tau; ++i) s += g[static_cast<std::size_t>(i)] - static_cast<double>(i) * J / I;
  return s / tau;
}

Sentence words(const std::string& text) {
  std::istringstream in(text);
  Sentence out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

AlignmentSet links(std::vector<std::pair<int, int>> l) { return AlignmentSet{std::move(l)}; }

}  // namespace

TEST_CASE("average lagging of reference policies") {
  for (int k = 1; k <= 9; ++k) {
    CHECK(average_lagging(waitk_policy(k, 12, 12), 12, 12).al == doctest::Approx(k));
  }
  CHECK(average_lagging(full_sentence_policy(7, 9), 9, 7).al == doctest::Approx(9));
  const auto rep = average_lagging(Policy{{1, 2, 3}}, 3, 3);
  CHECK(rep.al == doctest::Approx(1.0));
  CHECK(rep.tau == 3);
  CHECK(rep.r == doctest::Approx(1.0));
  CHECK_THROWS_AS(average_lagging(Policy{}, 3, 0), Error);
  CHECK_THROWS_AS(average_lagging(Policy{{1, 2}}, 3, 3), Error);
  CHECK_THROWS_AS(average_lagging(Policy{{4}}, 3, 1), Error);
}

TEST_CASE("average lagging matches a direct transcription") {
  Rng rng(10);
  for (int t = 0; t < 500; ++t) {
    const int J = rng.uniform_int(1, 20), I = rng.uniform_int(1, 20);
    std::vector<int> raw;
    for (int i = 0; i < I; ++i) raw.push_back(rng.uniform_int(1, J));
    const Policy g = monotone_project(raw);
    CHECK(average_lagging(g, J, I).al == doctest::Approx(reference_al(g.reads, J)).epsilon(1e-12));
  }
}

TEST_CASE("corpus BLEU") {
  CHECK(corpus_bleu({words("a b c d")}, {words("a b c d")}) == doctest::Approx(100.0));
  CHECK(corpus_bleu({words("a b c d")}, {words("a b c d e")}) == doctest::Approx(100.0 * std::exp(1.0 - 5.0 / 4.0)));
  CHECK(corpus_bleu({words("a b c d")}, {words("a b c d e")}) == doctest::Approx(77.88).epsilon(1e-4));
  CHECK(corpus_bleu({words("d c b a")}, {words("a b c d")}) == 0.0);
  CHECK(corpus_bleu({words("a b c d e")}, {words("a b c d")}) == doctest::Approx(std::pow(0.8 * 0.75 * 2.0 / 3.0 * 0.5, 0.25) * 100.0));
  CHECK(corpus_bleu({Sentence{}}, {words("a b c d")}) == 0.0);
  CHECK_THROWS_AS(corpus_bleu({words("a")}, {}), Error);
  BleuStats st;
  st.add(words("a b a b a"), words("a b a"));
  CHECK(st.matches[0] == 3);
  CHECK(st.totals[0] == 5);
  CHECK(st.matches[1] == 2);
}

TEST_CASE("sufficiency") {
  const std::vector<AlignmentSet> a{links({{1, 1}, {3, 2}, {4, 3}})};
  CHECK(sufficiency({Policy{{2, 3, 5}}}, a) == doctest::Approx(1.0));
  const std::vector<AlignmentSet> b{links({{3, 1}, {3, 2}, {4, 3}})};
  CHECK(sufficiency({Policy{{2, 3, 5}}}, b) == doctest::Approx(2.0 / 3.0));
  CHECK(sufficiency({full_sentence_policy(3, 5)}, b) == 1.0);
  CHECK(sufficiency({Policy{{1, 1}}}, {links({})}) == 1.0);
  CHECK(sufficiency({Policy{{1, 1}}}, {links({{2, 2}})}) == 0.0);
  CHECK_THROWS_AS(sufficiency({Policy{{1}}}, {}), Error);
}

TEST_CASE("sufficiency is monotone in the policy") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const int J = rng.uniform_int(1, 12), I = rng.uniform_int(1, 12);
    AlignmentSet al;
    for (int i = 1; i <= I; ++i) {
      if (rng.uniform() < 0.8) al.links.emplace_back(rng.uniform_int(1, J), i);
    }
    std::sort(al.links.begin(), al.links.end());
    al.links.erase(std::unique(al.links.begin(), al.links.end()), al.links.end());
    std::vector<int> raw;
    for (int i = 0; i < I; ++i) raw.push_back(rng.uniform_int(1, J));
    const Policy g = monotone_project(raw);
    Policy h = g;
    for (auto& v : h.reads) v = std::min(J, v + rng.uniform_int(0, 3));
    h = monotone_project(h.reads);
    CHECK(sufficiency({h}, {al}) >= sufficiency({g}, {al}));
  }
}

TEST_CASE("text evaluation pads realized policies and skips empty hypotheses") {
  const std::vector<Sentence> hyps{words("a b"), Sentence{}};
  const std::vector<Sentence> refs{words("a b c"), words("x")};
  const std::vector<Policy> pol{Policy{{1, 2}}, Policy{}};
  const std::vector<AlignmentSet> al{links({{1, 1}, {3, 2}, {3, 3}}), links({{1, 1}})};
  const auto rep = evaluate_text(hyps, refs, pol, {3, 1}, &al);
  CHECK(rep.empty_hypotheses == 1);
  CHECK(rep.al == doctest::Approx(average_lagging(Policy{{1, 2}}, 3, 2).al));
  REQUIRE(rep.sufficiency.has_value());
  CHECK(*rep.sufficiency == doctest::Approx(0.75));
  CHECK_FALSE(evaluate_text(hyps, refs, pol, {3, 1}, nullptr).sufficiency.has_value());
}

TEST_CASE("sweep output formats") {
  std::vector<SweepRow> rows{{"wait-5", 5.123, 80.456, std::nullopt},
                             {"oracle[3:7]", 3.0, 90.0, 0.987654},
                             {"wait-3", 3.0, 70.0, std::nullopt}};
  sort_rows(rows);
  CHECK(rows[0].config == "oracle[3:7]");
  CHECK(rows[1].config == "wait-3");
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  CHECK(csv.str() ==
        "config,AL,BLEU,sufficiency\n"
        "oracle[3:7],3.00,90.00,0.99\n"
        "wait-3,3.00,70.00,\n"
        "wait-5,5.12,80.46,\n");
  std::ostringstream js;
  write_sweep_json(js, rows);
  const auto doc = nlohmann::json::parse(js.str());
  REQUIRE(doc.size() == 3u);
  CHECK(doc[2]["AL"].get<double>() == 5.123);
  CHECK(doc[0]["sufficiency"].get<double>() == 0.987654);
  CHECK(doc[1]["sufficiency"].is_null());
}

TEST_CASE("sweep configuration names") {
  CHECK(SweepConfig::oracle({3, 7}).name() == "oracle[3:7]");
  CHECK(SweepConfig::gt_comparison({5, 9}).name() == "gt[5:9]");
  CHECK(SweepConfig::waitk(3).name() == "wait-3");
  CHECK(SweepConfig::full_sentence().name() == "full");
}

TEST_CASE("probability profile on a single sentence") {
  const Scorer s = tiny_scorer(23);
  Rng rng(5);
  const auto pair = random_pair(rng, 5, 3, 10);
  const std::vector<double> grid{0.1, 0.5, 1.0};
  const auto points = probability_profile(s, {pair}, grid);
  REQUIRE(points.size() == 9u);
  for (const auto& p : points) {
    const int g = std::clamp(static_cast<int>(std::ceil(p.q * 5 - 1e-9)), 1, 5);
    TokenSeq prefix{Vocabulary::kBos};
    prefix.insert(prefix.end(), pair.target.begin(), pair.target.begin() + (p.position - 1));
    const auto d = s.score_prefix({pair.source, prefix, g});
    CHECK(p.probability == doctest::Approx(d[static_cast<std::size_t>(pair.target[static_cast<std::size_t>(p.position - 1)])]).epsilon(1e-12));
  }
  std::ostringstream out;
  write_profile_csv(out, points);
  CHECK(out.str().rfind("q,i,p\n", 0) == 0);
  CHECK_THROWS_AS(probability_profile(s, {}, grid), Error);
}
