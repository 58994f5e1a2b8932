#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "bssimt/agent.hpp"
#include "bssimt/error.hpp"
#include "test_support.hpp"

using namespace bssimt;
using bssimt::testing::random_pair;
using bssimt::testing::tiny_scorer;

namespace {

const AgentConfig kSmall{6, 5, 4};

AgentEpisode random_episode(Rng& rng, int length, int vocab) {
  AgentEpisode ep;
  ep.labels.push_back(Action::Read);
  for (int t = 1; t < length; ++t) {
    TranslationStatus s;
    s.last_source = rng.uniform_int(0, vocab - 1);
    s.last_target = rng.uniform_int(0, vocab - 1);
    s.last_action = ep.labels.back();
    ep.statuses.push_back(s);
    ep.labels.push_back(rng.uniform_int(0, 1) ? Action::Write : Action::Read);
  }
  return ep;
}

}  // namespace

TEST_CASE("binary cross-entropy gradient matches central differences") {
  const Scorer scorer = tiny_scorer();
  const auto emb = StatusEmbeddings::from(scorer);
  Agent agent(kSmall, emb.dim(), 3);
  Rng rng(4);
  const auto ep = random_episode(rng, 9, static_cast<int>(scorer.source_vocab().size()));
  std::vector<double> grad(agent.parameter_count(), 0.0);
  agent.run_episode(emb, ep, 1.0, grad);
  auto params = agent.mutable_parameters();
  const double h = 1e-5;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = agent.run_episode(emb, ep, 1.0, {}).loss;
    params[k] = saved - h;
    const double down = agent.run_episode(emb, ep, 1.0, {}).loss;
    params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(grad[k]), 1e-4});
    if (std::abs(numeric - grad[k]) / scale > 1e-3) {
      FAIL_CHECK("parameter " << k << ": analytic " << grad[k] << " numeric " << numeric);
    }
  }
}

TEST_CASE("write probabilities are deterministic and in range") {
  const Scorer scorer = tiny_scorer();
  const auto emb = StatusEmbeddings::from(scorer);
  const Agent agent(kSmall, emb.dim(), 5);
  Rng rng(1);
  const auto ep = random_episode(rng, 20, 10);
  auto a = agent.initial_state(), b = agent.initial_state();
  for (const auto& s : ep.statuses) {
    const double p = agent.step(emb, a, s);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p == agent.step(emb, b, s));
  }
  CHECK(Agent(kSmall, emb.dim(), 5).parameters()[7] == agent.parameters()[7]);
  auto state = agent.initial_state();
  CHECK_THROWS_AS(agent.decide(emb, state, ep.statuses[0], 0.0), Error);
  CHECK(agent.decide(emb, state, ep.statuses[0], 1e-12) == Action::Write);
}

TEST_CASE("training episodes follow the policy") {
  const Scorer scorer = tiny_scorer(2);
  Rng rng(3);
  std::vector<SentencePair> pairs;
  std::vector<Policy> policies;
  for (int k = 0; k < 6; ++k) {
    const int J = rng.uniform_int(1, 7), I = rng.uniform_int(1, 7);
    pairs.push_back(random_pair(rng, J, I, 10));
    std::vector<int> raw;
    for (int i = 0; i < I; ++i) raw.push_back(rng.uniform_int(1, J));
    policies.push_back(monotone_project(raw));
  }
  const auto gen = make_training_episodes(scorer, pairs, policies, StatusMode::Generated);
  const auto gt = make_training_episodes(scorer, pairs, policies, StatusMode::GroundTruth);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& ep = gt[k];
    const int I = pairs[k].target_length(), J = pairs[k].source_length();
    CHECK(std::count(ep.labels.begin(), ep.labels.end(), Action::Write) == I);
    CHECK(std::count(ep.labels.begin(), ep.labels.end(), Action::Read) == J);
    CHECK(ep.labels.front() == Action::Read);
    REQUIRE(ep.statuses.size() + 1 == ep.labels.size());
    CHECK(actions_to_policy(ep.labels) == policies[k]);
    int writes = 0;
    for (std::size_t t = 0; t < ep.statuses.size(); ++t) {
      CHECK(ep.statuses[t].last_action == ep.labels[t]);
      CHECK(gen[k].statuses[t].last_source == ep.statuses[t].last_source);
      CHECK(gen[k].statuses[t].last_action == ep.statuses[t].last_action);
      if (t > 0 && ep.labels[t] == Action::Write) {
        ++writes;
        CHECK(ep.statuses[t].last_target == pairs[k].target[static_cast<std::size_t>(writes - 1)]);
      }
    }
    int reads = 0;
    for (std::size_t t = 0; t < ep.statuses.size(); ++t) {
      if (ep.labels[t] == Action::Read) ++reads;
      const TokenId expected =
          reads == J ? Vocabulary::kEos : pairs[k].source[static_cast<std::size_t>(reads - 1)];
      CHECK(ep.statuses[t].last_source == expected);
    }
  }
  CHECK_THROWS_AS(make_training_episodes(scorer, pairs, {}, StatusMode::Generated), Error);
}

TEST_CASE("the agent memorizes a single episode") {
  const Scorer scorer = tiny_scorer();
  const auto emb = StatusEmbeddings::from(scorer);
  Agent agent(kSmall, emb.dim(), 11);
  Rng rng(12);
  const std::vector<AgentEpisode> episodes{random_episode(rng, 12, 10)};
  TrainSchedule sched;
  sched.epochs = 300;
  sched.batch_size = 1;
  sched.learning_rate = 2e-2;
  sched.warmup_steps = 10;
  const auto report = train_agent(agent, emb, episodes, sched);
  CHECK(report.final_loss < 0.05);
  CHECK(action_accuracy(agent, emb, episodes) == 1.0);
}

TEST_CASE("agent checkpoints round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "bssimt_unit";
  std::filesystem::create_directories(dir);
  const Agent agent(kSmall, 8, 21);
  agent.save(dir / "agent.bin");
  const Agent back = Agent::load(dir / "agent.bin");
  CHECK(back.config() == agent.config());
  CHECK(back.embed_dim() == 8);
  CHECK(std::equal(agent.parameters().begin(), agent.parameters().end(), back.parameters().begin(),
                   back.parameters().end()));
  CHECK_THROWS_AS(Scorer::load(dir / "agent.bin"), Error);
  CHECK_THROWS_AS(Agent(AgentConfig{0, 4, 4}, 8, 1), Error);
}
