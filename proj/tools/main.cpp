// bssimt command-line front end. Every command runs through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bssimt/bssimt.h"
#include "run_config.hpp"

namespace fs = std::filesystem;
using bssimt::cli::ConfigError;
using bssimt::cli::RunConfig;

namespace {

struct Failure {
  int code;
  std::string message;
};

void check(bssimt_status s) {
  if (s != BSSIMT_OK) throw Failure{static_cast<int>(s), bssimt_last_error()};
}

[[noreturn]] void data_failure(const std::string& message) { throw Failure{BSSIMT_ERR_DATA, message}; }

struct ModelDeleter {
  void operator()(bssimt_model* m) const { bssimt_model_free(m); }
};
struct AgentDeleter {
  void operator()(bssimt_agent* a) const { bssimt_agent_free(a); }
};
struct VocabDeleter {
  void operator()(bssimt_vocab* v) const { bssimt_vocab_free(v); }
};
using ModelPtr = std::unique_ptr<bssimt_model, ModelDeleter>;
using AgentPtr = std::unique_ptr<bssimt_agent, AgentDeleter>;
using VocabPtr = std::unique_ptr<bssimt_vocab, VocabDeleter>;

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

// Path that must be given and must exist.
std::string input(const RunConfig& cfg, const std::string& key) {
  const std::string& p = cfg.text(key);
  if (p.empty()) throw ConfigError(cfg.command() + " needs " + flag_name(key));
  if (!fs::exists(p)) data_failure(flag_name(key) + ": no such file: " + p);
  return p;
}

// Optional input: empty means absent.
const char* optional_input(const RunConfig& cfg, const std::string& key, std::string& holder) {
  holder = cfg.text(key);
  if (holder.empty()) return nullptr;
  if (!fs::exists(holder)) data_failure(flag_name(key) + ": no such file: " + holder);
  return holder.c_str();
}

class Run {
 public:
  explicit Run(const RunConfig& cfg) : cfg_(cfg), dir_(cfg.text("out_dir")) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) data_failure("cannot create " + dir_.string() + ": " + ec.message());
  }

  std::string output(const std::string& name) {
    outputs_.push_back(name);
    return (dir_ / name).string();
  }

  void finish() const {
    const std::string stem = cfg_.command();
    write_file(dir_ / (stem + ".config"), cfg_.serialize());
    std::ostringstream m;
    m << "command = " << stem << '\n'
      << "version = " << bssimt_version() << '\n'
      << "seed = " << cfg_.text("seed") << '\n'
      << "config_hash = " << bssimt::cli::hex64(cfg_.hash()) << '\n';
    for (const auto& name : outputs_) {
      std::ifstream in(dir_ / name, std::ios::binary);
      if (!in) data_failure("expected output " + (dir_ / name).string() + " is missing");
      std::stringstream bytes;
      bytes << in.rdbuf();
      m << "output " << name << " = " << bssimt::cli::hex64(bssimt::cli::hash_bytes(bytes.str())) << '\n';
    }
    write_file(dir_ / (stem + ".manifest"), m.str());
  }

  const RunConfig& cfg() const { return cfg_; }
  int workers() const { return static_cast<int>(cfg_.integer("workers")); }

 private:
  static void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) data_failure("cannot write " + path.string());
  }

  const RunConfig& cfg_;
  fs::path dir_;
  std::vector<std::string> outputs_;
};

int as_int(const RunConfig& cfg, const char* key) { return static_cast<int>(cfg.integer(key)); }

bssimt_train_config train_config(const RunConfig& cfg) {
  bssimt_train_config t;
  bssimt_train_config_default(&t);
  t.epochs = as_int(cfg, "epochs");
  t.batch_size = as_int(cfg, "batch_size");
  t.learning_rate = cfg.real("learning_rate");
  t.warmup_steps = as_int(cfg, "warmup_steps");
  t.weight_decay = cfg.real("weight_decay");
  t.clip_norm = cfg.real("clip_norm");
  t.seed = cfg.count("seed");
  t.workers = as_int(cfg, "workers");
  t.max_steps = cfg.integer("max_steps");
  return t;
}

ModelPtr load_model(const RunConfig& cfg) {
  bssimt_model* m = nullptr;
  check(bssimt_model_load(input(cfg, "model").c_str(), &m));
  return ModelPtr(m);
}

void cmd_synth_data(Run& run) {
  const auto& cfg = run.cfg();
  bssimt_synth_config c;
  bssimt_synth_config_default(&c);
  c.vocab_size = as_int(cfg, "vocab_size");
  c.min_length = as_int(cfg, "min_length");
  c.max_length = as_int(cfg, "max_length");
  c.lookahead = as_int(cfg, "lookahead");
  c.seed = cfg.count("seed");
  c.train_count = as_int(cfg, "train_count");
  c.test_count = as_int(cfg, "test_count");
  check(bssimt_synth_write(&c, cfg.text("out_dir").c_str()));
  for (const char* split : {"train", "test"}) {
    for (const char* ext : {".src", ".tgt", ".align"}) run.output(std::string(split) + ext);
  }
}

void cmd_make_vocab(Run& run) {
  const auto& cfg = run.cfg();
  const int min_freq = as_int(cfg, "min_freq");
  for (const auto& [key, name] : {std::pair<std::string, std::string>{"source", "source.vocab"},
                                  {"target", "target.vocab"}}) {
    bssimt_vocab* v = nullptr;
    check(bssimt_vocab_build(input(cfg, key).c_str(), min_freq, &v));
    VocabPtr owned(v);
    check(bssimt_vocab_save(v, run.output(name).c_str()));
    size_t size = 0;
    check(bssimt_vocab_size(v, &size));
    std::cout << name << ": " << size << " entries\n";
  }
}

void cmd_train_multipath(Run& run) {
  const auto& cfg = run.cfg();
  ModelPtr model;
  if (!cfg.text("model").empty()) {
    model = load_model(cfg);
  } else {
    bssimt_vocab *vs = nullptr, *vt = nullptr;
    check(bssimt_vocab_load(input(cfg, "source_vocab").c_str(), &vs));
    VocabPtr owned_s(vs);
    check(bssimt_vocab_load(input(cfg, "target_vocab").c_str(), &vt));
    VocabPtr owned_t(vt);
    bssimt_model_config mc;
    bssimt_model_config_default(&mc);
    mc.encoder_layers = as_int(cfg, "encoder_layers");
    mc.decoder_layers = as_int(cfg, "decoder_layers");
    mc.heads = as_int(cfg, "heads");
    mc.embed_dim = as_int(cfg, "embed_dim");
    mc.ffn_dim = as_int(cfg, "ffn_dim");
    mc.dropout = cfg.real("dropout");
    mc.label_smoothing = cfg.real("label_smoothing");
    bssimt_model* m = nullptr;
    check(bssimt_model_create(&mc, vs, vt, cfg.count("seed"), &m));
    model.reset(m);
  }
  const auto tc = train_config(cfg);
  double loss = 0.0;
  check(bssimt_model_train_multipath(model.get(), input(cfg, "source").c_str(),
                                     input(cfg, "target").c_str(), &tc, as_int(cfg, "fixed_k"), &loss));
  check(bssimt_model_save(model.get(), run.output("model.bin").c_str()));
  std::printf("final training loss %.4f\n", loss);
}

void cmd_search(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  const std::string& method = cfg.text("method");
  bssimt_search_method m = BSSIMT_SEARCH_BINARY;
  if (method == "gt") {
    m = BSSIMT_SEARCH_GT_COMPARISON;
  } else if (method != "binary") {
    throw ConfigError("--method must be binary or gt");
  }
  std::string trace;
  if (cfg.flag("trace")) {
    if (m != BSSIMT_SEARCH_BINARY) throw ConfigError("--trace needs --method binary");
    trace = run.output("search-trace.txt");
  }
  const std::string src = input(cfg, "source"), tgt = input(cfg, "target");
  const std::string out = run.output("policies.txt");
  check(bssimt_search(model.get(), src.c_str(), tgt.c_str(), as_int(cfg, "l1"), as_int(cfg, "r1"), m,
                      run.workers(), out.c_str(), trace.empty() ? nullptr : trace.c_str()));
}

void cmd_alternate_train(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  const auto tc = train_config(cfg);
  bssimt_alternate_report rep{};
  const std::string src = input(cfg, "source"), tgt = input(cfg, "target");
  const std::string dsrc = input(cfg, "dev_source"), dtgt = input(cfg, "dev_target");
  const std::string policies = run.output("policies.txt");
  check(bssimt_alternate_train(model.get(), src.c_str(), tgt.c_str(), dsrc.c_str(), dtgt.c_str(),
                               as_int(cfg, "l1"), as_int(cfg, "r1"), as_int(cfg, "rounds"), &tc,
                               policies.c_str(), &rep));
  check(bssimt_model_save(model.get(), run.output("model.bin").c_str()));
  std::printf("best round %d, held-out oracle BLEU %.2f\n", rep.best_round, rep.best_dev_bleu);
}

void cmd_train_agent(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  const std::string& mode = cfg.text("status_mode");
  if (mode != "generated" && mode != "ground-truth") {
    throw ConfigError("--status-mode must be generated or ground-truth");
  }
  bssimt_agent_config ac{as_int(cfg, "hidden_dim"), as_int(cfg, "action_embed_dim"),
                         as_int(cfg, "status_projection_dim")};
  bssimt_agent* a = nullptr;
  check(bssimt_agent_create(&ac, model.get(), cfg.count("seed"), &a));
  AgentPtr agent(a);
  bssimt_train_config tc;
  bssimt_train_config_default(&tc);
  tc.epochs = as_int(cfg, "agent_epochs");
  tc.batch_size = as_int(cfg, "agent_batch_size");
  tc.learning_rate = cfg.real("agent_learning_rate");
  tc.warmup_steps = as_int(cfg, "agent_warmup_steps");
  tc.seed = cfg.count("seed");
  tc.workers = run.workers();
  std::string hs, ht, hp;
  const char* heldout_src = optional_input(cfg, "heldout_source", hs);
  const char* heldout_tgt = optional_input(cfg, "heldout_target", ht);
  const char* heldout_pol = optional_input(cfg, "heldout_policies", hp);
  const bool any = heldout_src || heldout_tgt || heldout_pol;
  if (any && !(heldout_src && heldout_tgt && heldout_pol)) {
    throw ConfigError("held-out evaluation needs --heldout-source, --heldout-target and --heldout-policies");
  }
  double loss = 0.0, acc = 0.0;
  check(bssimt_agent_train(agent.get(), model.get(), input(cfg, "source").c_str(),
                           input(cfg, "target").c_str(), input(cfg, "policies").c_str(),
                           mode == "ground-truth", &tc, heldout_src, heldout_tgt, heldout_pol, &loss,
                           &acc));
  check(bssimt_agent_save(agent.get(), run.output("agent.bin").c_str()));
  std::printf("final agent loss %.4f\n", loss);
  if (any) std::printf("held-out action accuracy %.4f\n", acc);
}

void cmd_decode(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  bssimt_decode_options o;
  bssimt_decode_options_default(&o);
  o.workers = run.workers();
  o.threshold = cfg.real("threshold");
  o.k = as_int(cfg, "k");
  AgentPtr agent;
  std::string policy_path;
  const std::string& mode = cfg.text("mode");
  if (mode == "agent") {
    bssimt_agent* a = nullptr;
    check(bssimt_agent_load(input(cfg, "agent").c_str(), &a));
    agent.reset(a);
    o.mode = BSSIMT_DECODE_AGENT;
    o.agent = a;
  } else if (mode == "oracle") {
    policy_path = input(cfg, "policies");
    o.mode = BSSIMT_DECODE_ORACLE;
    o.policy_path = policy_path.c_str();
  } else if (mode == "waitk") {
    o.mode = BSSIMT_DECODE_WAITK;
  } else if (mode == "full") {
    o.mode = BSSIMT_DECODE_FULL;
  } else {
    throw ConfigError("--mode must be agent, oracle, waitk or full");
  }
  const std::string src = input(cfg, "source");
  const std::string hyp = run.output("hypotheses.txt");
  const std::string pol = run.output("realized-policies.txt");
  const std::string act = run.output("actions.txt");
  check(bssimt_decode(model.get(), src.c_str(), &o, hyp.c_str(), pol.c_str(), act.c_str()));
}

void cmd_eval(Run& run) {
  const auto& cfg = run.cfg();
  std::string align_holder;
  const char* align = optional_input(cfg, "alignments", align_holder);
  bssimt_eval_report rep{};
  check(bssimt_eval_files(input(cfg, "hypotheses").c_str(), input(cfg, "references").c_str(),
                          input(cfg, "policies").c_str(), input(cfg, "source").c_str(), align, &rep));
  std::ofstream out(run.output("eval.csv"), std::ios::binary | std::ios::trunc);
  char line[160];
  if (rep.has_sufficiency) {
    std::snprintf(line, sizeof line, "eval,%.2f,%.2f,%.2f\n", rep.al, rep.bleu, rep.sufficiency);
  } else {
    std::snprintf(line, sizeof line, "eval,%.2f,%.2f,\n", rep.al, rep.bleu);
  }
  out << "config,AL,BLEU,sufficiency\n" << line;
  if (!out) data_failure("cannot write eval.csv");
  std::cout << "config,AL,BLEU,sufficiency\n" << line;
  if (rep.empty_hypotheses > 0) {
    std::cerr << "warning: " << rep.empty_hypotheses << " empty hypotheses left out of AL\n";
  }
}

void cmd_sweep(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  std::vector<bssimt_sweep_item> items;
  auto item = [] {
    bssimt_sweep_item it{};
    it.threshold = 0.5;
    return it;
  };
  for (const auto& [l, r] : bssimt::cli::parse_intervals(cfg.text("intervals"))) {
    auto it = item();
    it.kind = BSSIMT_SWEEP_ORACLE;
    it.l1 = l;
    it.r1 = r;
    items.push_back(it);
  }
  for (const auto& [l, r] : bssimt::cli::parse_intervals(cfg.text("gt_intervals"))) {
    auto it = item();
    it.kind = BSSIMT_SWEEP_GT_COMPARISON;
    it.l1 = l;
    it.r1 = r;
    items.push_back(it);
  }
  for (int k : bssimt::cli::parse_ints(cfg.text("waitk"))) {
    auto it = item();
    it.kind = BSSIMT_SWEEP_WAITK;
    it.k = k;
    items.push_back(it);
  }
  AgentPtr agent;
  const auto thresholds = bssimt::cli::parse_reals(cfg.text("thresholds"));
  if (!thresholds.empty()) {
    bssimt_agent* a = nullptr;
    check(bssimt_agent_load(input(cfg, "agent").c_str(), &a));
    agent.reset(a);
    for (double t : thresholds) {
      auto it = item();
      it.kind = BSSIMT_SWEEP_AGENT;
      it.agent = a;
      it.threshold = t;
      items.push_back(it);
    }
  }
  if (cfg.flag("full")) {
    auto it = item();
    it.kind = BSSIMT_SWEEP_FULL;
    items.push_back(it);
  }
  if (items.empty()) throw ConfigError("sweep has no configurations");
  std::string align_holder;
  const char* align = optional_input(cfg, "alignments", align_holder);
  const std::string src = input(cfg, "source"), tgt = input(cfg, "target");
  const std::string csv = run.output("sweep.csv"), json = run.output("sweep.json");
  check(bssimt_sweep(model.get(), items.data(), items.size(), src.c_str(), tgt.c_str(), align,
                     run.workers(), csv.c_str(), json.c_str()));
  std::ifstream in(csv);
  std::cout << in.rdbuf();
}

void cmd_profile(Run& run) {
  const auto& cfg = run.cfg();
  const auto model = load_model(cfg);
  const auto q = bssimt::cli::parse_reals(cfg.text("q_grid"));
  const std::string src = input(cfg, "source"), tgt = input(cfg, "target");
  const std::string out = run.output("profile.csv");
  check(bssimt_profile(model.get(), src.c_str(), tgt.c_str(), as_int(cfg, "target_length"), q.data(),
                       q.size(), run.workers(), out.c_str()));
}

const std::map<std::string, void (*)(Run&)> kHandlers{
    {"synth-data", cmd_synth_data},       {"make-vocab", cmd_make_vocab},
    {"train-multipath", cmd_train_multipath}, {"search", cmd_search},
    {"alternate-train", cmd_alternate_train}, {"train-agent", cmd_train_agent},
    {"decode", cmd_decode},               {"eval", cmd_eval},
    {"sweep", cmd_sweep},                 {"profile", cmd_profile},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary-search policies for simultaneous translation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bssimt_version()));

  struct Sub {
    CLI::App* app;
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Sub> subs;
  for (const auto& c : bssimt::cli::commands()) {
    Sub& s = subs[c.name];
    s.app = app.add_subcommand(c.name, c.description);
    s.app->add_option("--config", s.config_file, "key = value file; flags override it");
    for (const auto& k : bssimt::cli::key_specs()) {
      if (!bssimt::cli::command_uses(k, c.name)) continue;
      if (k.type == bssimt::cli::ValueType::Flag) {
        s.options[k.key] = s.app->add_flag(flag_name(k.key) + "{1}", s.values[k.key], k.help);
      } else {
        s.options[k.key] =
            s.app->add_option(flag_name(k.key), s.values[k.key], k.help)->default_str(k.default_value);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return BSSIMT_ERR_USAGE;
  }

  for (auto& [name, sub] : subs) {
    if (!sub.app->parsed()) continue;
    try {
      RunConfig cfg(name);
      if (!sub.config_file.empty()) cfg.merge_file(sub.config_file);
      for (const auto& [key, opt] : sub.options) {
        if (opt->count() > 0) cfg.set(key, sub.values[key]);
      }
      if (cfg.integer("workers") < 1) throw ConfigError("--workers must be at least 1");
      Run run(cfg);
      kHandlers.at(name)(run);
      run.finish();
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return BSSIMT_ERR_USAGE;
    } catch (const Failure& f) {
      std::cerr << "error: " << f.message << '\n';
      return f.code;
    }
  }
  return BSSIMT_ERR_USAGE;
}
