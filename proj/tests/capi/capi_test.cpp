#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "bssimt/bssimt.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct Workspace {
  fs::path dir;
  bssimt_vocab* src = nullptr;
  bssimt_vocab* tgt = nullptr;
  bssimt_model* model = nullptr;

  Workspace() {
    dir = fs::temp_directory_path() / "bssimt_capi";
    fs::remove_all(dir);
    fs::create_directories(dir);
    bssimt_synth_config sc;
    bssimt_synth_config_default(&sc);
    sc.vocab_size = 8;
    sc.min_length = 4;
    sc.max_length = 7;
    sc.train_count = 40;
    sc.test_count = 6;
    REQUIRE(bssimt_synth_write(&sc, dir.c_str()) == BSSIMT_OK);
    REQUIRE(bssimt_vocab_build(path("train.src").c_str(), 1, &src) == BSSIMT_OK);
    REQUIRE(bssimt_vocab_build(path("train.tgt").c_str(), 1, &tgt) == BSSIMT_OK);
    bssimt_model_config mc;
    bssimt_model_config_default(&mc);
    mc.encoder_layers = 1;
    mc.decoder_layers = 1;
    mc.embed_dim = 8;
    mc.ffn_dim = 16;
    REQUIRE(bssimt_model_create(&mc, src, tgt, 3, &model) == BSSIMT_OK);
  }
  ~Workspace() {
    bssimt_model_free(model);
    bssimt_vocab_free(src);
    bssimt_vocab_free(tgt);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

bssimt_train_config short_training() {
  bssimt_train_config tc;
  bssimt_train_config_default(&tc);
  tc.epochs = 1;
  tc.batch_size = 8;
  return tc;
}

}  // namespace

TEST_CASE("version and defaults") {
  CHECK(std::string(bssimt_version()).rfind("0.3.0", 0) == 0);
  bssimt_synth_config sc;
  bssimt_synth_config_default(&sc);
  CHECK(sc.vocab_size == 32);
  CHECK(sc.lookahead == 2);
  CHECK(sc.train_count == 2000);
  CHECK(sc.test_count == 200);
}

TEST_CASE("errors map to status codes with a message") {
  bssimt_vocab* v = nullptr;
  CHECK(bssimt_vocab_load("/nonexistent/bssimt.vocab", &v) == BSSIMT_ERR_DATA);
  CHECK(v == nullptr);
  CHECK(std::string(bssimt_last_error()).find("bssimt.vocab") != std::string::npos);
  CHECK(bssimt_vocab_load(nullptr, &v) == BSSIMT_ERR_USAGE);
  CHECK(bssimt_model_save(nullptr, "x") == BSSIMT_ERR_USAGE);
  bssimt_model* m = nullptr;
  CHECK(bssimt_model_load("/nonexistent/model.bin", &m) == BSSIMT_ERR_DATA);
  bssimt_model_free(nullptr);
  bssimt_vocab_free(nullptr);
  bssimt_agent_free(nullptr);
}

TEST_CASE("model lifecycle and scoring") {
  Workspace w;
  size_t vs = 0, n = 0;
  REQUIRE(bssimt_model_target_vocab_size(w.model, &vs) == BSSIMT_OK);
  REQUIRE(bssimt_model_parameter_count(w.model, &n) == BSSIMT_OK);
  CHECK(vs == 12u);
  CHECK(n > 0u);

  int32_t s4 = 0;
  REQUIRE(bssimt_vocab_encode(w.src, "s4", &s4) == BSSIMT_OK);
  CHECK(s4 >= 4);
  int32_t unk = 0;
  REQUIRE(bssimt_vocab_encode(w.src, "zzz", &unk) == BSSIMT_OK);
  CHECK(unk == 2);

  const int32_t source[] = {s4, s4, s4};
  const int32_t prefix[] = {0};
  std::vector<double> dist(vs);
  REQUIRE(bssimt_model_score_prefix(w.model, source, 3, prefix, 1, 2, dist.data(), dist.size()) == BSSIMT_OK);
  double sum = 0.0;
  for (double p : dist) sum += p;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(bssimt_model_score_prefix(w.model, source, 3, prefix, 1, 4, dist.data(), dist.size()) ==
        BSSIMT_ERR_USAGE);
  CHECK(bssimt_model_score_prefix(w.model, source, 3, prefix, 1, 2, dist.data(), 3) == BSSIMT_ERR_USAGE);

  auto tc = short_training();
  double loss = 0.0;
  REQUIRE(bssimt_model_train_multipath(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(),
                                       &tc, 0, &loss) == BSSIMT_OK);
  CHECK(std::isfinite(loss));
  CHECK(bssimt_model_train_multipath(w.model, w.path("missing.src").c_str(),
                                     w.path("train.tgt").c_str(), &tc, 0, &loss) == BSSIMT_ERR_DATA);
  tc.epochs = 0;
  CHECK(bssimt_model_train_full(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(), &tc,
                                &loss) == BSSIMT_ERR_USAGE);

  REQUIRE(bssimt_model_save(w.model, w.path("model.bin").c_str()) == BSSIMT_OK);
  bssimt_model* back = nullptr;
  REQUIRE(bssimt_model_load(w.path("model.bin").c_str(), &back) == BSSIMT_OK);
  REQUIRE(bssimt_model_save(back, w.path("model2.bin").c_str()) == BSSIMT_OK);
  CHECK(slurp(w.path("model.bin")) == slurp(w.path("model2.bin")));
  bssimt_model_free(back);
}

TEST_CASE("search, decode, evaluate and sweep") {
  Workspace w;
  auto tc = short_training();
  REQUIRE(bssimt_model_train_multipath(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(),
                                       &tc, 0, nullptr) == BSSIMT_OK);
  REQUIRE(bssimt_search(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(), 1, 3,
                        BSSIMT_SEARCH_BINARY, 1, w.path("policies.txt").c_str(),
                        w.path("trace.txt").c_str()) == BSSIMT_OK);
  CHECK(line_count(w.path("policies.txt")) == 40u);
  CHECK(fs::file_size(w.path("trace.txt")) > 0u);
  REQUIRE(bssimt_search(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(), 1, 3,
                        BSSIMT_SEARCH_GT_COMPARISON, 1, w.path("gt.txt").c_str(), nullptr) == BSSIMT_OK);
  CHECK(bssimt_search(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(), 3, 1,
                      BSSIMT_SEARCH_BINARY, 1, w.path("bad.txt").c_str(), nullptr) == BSSIMT_ERR_USAGE);

  REQUIRE(bssimt_model_train_policy(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(),
                                    w.path("policies.txt").c_str(), &tc, nullptr) == BSSIMT_OK);
  CHECK(bssimt_model_train_policy(w.model, w.path("test.src").c_str(), w.path("test.tgt").c_str(),
                                  w.path("policies.txt").c_str(), &tc, nullptr) == BSSIMT_ERR_DATA);

  bssimt_agent_config ac;
  bssimt_agent_config_default(&ac);
  ac.hidden_dim = ac.action_embed_dim = ac.status_projection_dim = 8;
  bssimt_agent* agent = nullptr;
  REQUIRE(bssimt_agent_create(&ac, w.model, 5, &agent) == BSSIMT_OK);
  double aloss = 0.0, acc = 0.0;
  REQUIRE(bssimt_agent_train(agent, w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(),
                             w.path("policies.txt").c_str(), 0, &tc, w.path("train.src").c_str(),
                             w.path("train.tgt").c_str(), w.path("policies.txt").c_str(), &aloss,
                             &acc) == BSSIMT_OK);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  REQUIRE(bssimt_agent_save(agent, w.path("agent.bin").c_str()) == BSSIMT_OK);
  bssimt_agent* loaded = nullptr;
  REQUIRE(bssimt_agent_load(w.path("agent.bin").c_str(), &loaded) == BSSIMT_OK);

  bssimt_decode_options opts;
  bssimt_decode_options_default(&opts);
  CHECK(opts.threshold == 0.5);
  opts.mode = BSSIMT_DECODE_AGENT;
  opts.agent = loaded;
  REQUIRE(bssimt_decode(w.model, w.path("test.src").c_str(), &opts, w.path("hyp.txt").c_str(),
                        w.path("real.txt").c_str(), w.path("act.txt").c_str()) == BSSIMT_OK);
  CHECK(line_count(w.path("hyp.txt")) == 6u);
  CHECK(line_count(w.path("act.txt")) == 6u);
  opts.mode = BSSIMT_DECODE_WAITK;
  opts.k = 2;
  REQUIRE(bssimt_decode(w.model, w.path("test.src").c_str(), &opts, w.path("hyp2.txt").c_str(),
                        w.path("real2.txt").c_str(), nullptr) == BSSIMT_OK);
  opts.k = 0;
  CHECK(bssimt_decode(w.model, w.path("test.src").c_str(), &opts, w.path("hyp3.txt").c_str(), nullptr,
                      nullptr) == BSSIMT_ERR_USAGE);
  opts.mode = BSSIMT_DECODE_AGENT;
  opts.agent = nullptr;
  CHECK(bssimt_decode(w.model, w.path("test.src").c_str(), &opts, w.path("hyp3.txt").c_str(), nullptr,
                      nullptr) == BSSIMT_ERR_USAGE);

  bssimt_eval_report rep;
  REQUIRE(bssimt_eval_files(w.path("hyp2.txt").c_str(), w.path("test.tgt").c_str(), w.path("real2.txt").c_str(),
                            w.path("test.src").c_str(), w.path("test.align").c_str(), &rep) == BSSIMT_OK);
  CHECK(rep.has_sufficiency == 1);
  CHECK(rep.bleu >= 0.0);
  CHECK(bssimt_eval_files(w.path("hyp2.txt").c_str(), w.path("train.tgt").c_str(),
                          w.path("real2.txt").c_str(), w.path("test.src").c_str(), nullptr,
                          &rep) == BSSIMT_ERR_DATA);

  const bssimt_sweep_item items[] = {
      {BSSIMT_SWEEP_ORACLE, 1, 3, 0, nullptr, 0.5},
      {BSSIMT_SWEEP_WAITK, 0, 0, 2, nullptr, 0.5},
      {BSSIMT_SWEEP_AGENT, 0, 0, 0, loaded, 0.5},
      {BSSIMT_SWEEP_FULL, 0, 0, 0, nullptr, 0.5},
  };
  REQUIRE(bssimt_sweep(w.model, items, 4, w.path("test.src").c_str(), w.path("test.tgt").c_str(),
                       w.path("test.align").c_str(), 1, w.path("sweep.csv").c_str(),
                       w.path("sweep.json").c_str()) == BSSIMT_OK);
  CHECK(line_count(w.path("sweep.csv")) == 5u);
  CHECK(slurp(w.path("sweep.csv")).rfind("config,AL,BLEU,sufficiency\n", 0) == 0);

  const double q[] = {0.5, 1.0};
  REQUIRE(bssimt_profile(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(), 3, q, 2, 1,
                         w.path("profile.csv").c_str()) == BSSIMT_OK);
  CHECK(line_count(w.path("profile.csv")) == 7u);

  bssimt_agent_free(agent);
  bssimt_agent_free(loaded);
}

TEST_CASE("alternate training reports its best round") {
  Workspace w;
  auto tc = short_training();
  bssimt_alternate_report rep{};
  REQUIRE(bssimt_alternate_train(w.model, w.path("train.src").c_str(), w.path("train.tgt").c_str(),
                                 w.path("test.src").c_str(), w.path("test.tgt").c_str(), 1, 3, 2, &tc,
                                 w.path("alt.txt").c_str(), &rep) == BSSIMT_OK);
  CHECK(rep.best_round >= 1);
  CHECK(rep.best_round <= 2);
  CHECK(line_count(w.path("alt.txt")) == 40u);
}
