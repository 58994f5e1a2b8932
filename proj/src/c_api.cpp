#include "bssimt/bssimt.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "bssimt/agent.hpp"
#include "bssimt/corpus.hpp"
#include "bssimt/error.hpp"
#include "bssimt/metrics.hpp"
#include "bssimt/search.hpp"
#include "bssimt/sweep.hpp"
#include "bssimt/train.hpp"

struct bssimt_vocab {
  bssimt::Vocabulary vocab;
};

struct bssimt_model {
  bssimt::Scorer scorer;
};

struct bssimt_agent {
  bssimt::Agent agent;
};

namespace {

using namespace bssimt;

thread_local std::string g_last_error;

template <typename Fn>
bssimt_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BSSIMT_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<bssimt_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return BSSIMT_ERR_INTERNAL;
}

template <typename T>
T& need(T* p, const char* what) {
  if (!p) usage_error(std::string(what) + " must not be NULL");
  return *p;
}

std::string need_path(const char* p, const char* what) {
  if (!p || !*p) usage_error(std::string(what) + " path is required");
  return p;
}

TrainSchedule to_schedule(const bssimt_train_config& c) {
  TrainSchedule s;
  s.epochs = c.epochs;
  s.batch_size = c.batch_size;
  s.learning_rate = c.learning_rate;
  s.warmup_steps = c.warmup_steps;
  s.weight_decay = c.weight_decay;
  s.clip_norm = c.clip_norm;
  s.seed = c.seed;
  s.workers = c.workers;
  s.max_steps = c.max_steps;
  return s;
}

std::vector<SentencePair> load_pairs(const Scorer& scorer, const char* source, const char* target) {
  std::vector<std::string> warnings;
  auto pairs = load_parallel(need_path(source, "source"), need_path(target, "target"),
                             scorer.source_vocab(), scorer.target_vocab(), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  if (pairs.empty()) data_error(std::string(source) + ": no sentence pairs");
  return pairs;
}

std::vector<TokenSeq> load_sources(const Scorer& scorer, const char* source) {
  std::vector<TokenSeq> out;
  std::size_t line = 0;
  for (const auto& s : read_tokenized_lines(need_path(source, "source"))) {
    ++line;
    if (s.empty()) data_error(std::string(source) + ": line " + std::to_string(line) + " is empty");
    out.push_back(scorer.source_vocab().encode(s));
  }
  if (out.empty()) data_error(std::string(source) + ": no sentences");
  return out;
}

std::vector<Policy> load_matching_policies(const char* path, const std::vector<SentencePair>& pairs) {
  auto policies = load_policies(need_path(path, "policy"));
  if (policies.size() != pairs.size()) {
    data_error(std::string(path) + " has " + std::to_string(policies.size()) +
               " policies for " + std::to_string(pairs.size()) + " sentence pairs");
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (policies[k].length() != pairs[k].target_length()) {
      data_error(std::string(path) + ": line " + std::to_string(k + 1) +
                 " does not match the target length");
    }
    try {
      validate_policy(policies[k], pairs[k].source_length());
    } catch (const Error& e) {
      data_error(std::string(path) + ": line " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  return policies;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot write " + path);
  return out;
}

void write_tokens(std::ostream& out, const Sentence& s) {
  for (std::size_t k = 0; k < s.size(); ++k) out << (k ? " " : "") << s[k];
  out << '\n';
}

}  // namespace

extern "C" {

const char* bssimt_version(void) { return BSSIMT_VERSION_STRING; }

const char* bssimt_last_error(void) { return g_last_error.c_str(); }

void bssimt_model_config_default(bssimt_model_config* c) {
  if (!c) return;
  const ModelConfig d;
  *c = {d.encoder_layers, d.decoder_layers, d.heads, d.embed_dim, d.ffn_dim, d.dropout,
        d.label_smoothing};
}

void bssimt_train_config_default(bssimt_train_config* c) {
  if (!c) return;
  const TrainSchedule d;
  *c = {d.epochs, d.batch_size, d.learning_rate, d.warmup_steps, d.weight_decay,
        d.clip_norm, d.seed, d.workers, d.max_steps};
}

void bssimt_agent_config_default(bssimt_agent_config* c) {
  if (!c) return;
  const AgentConfig d;
  *c = {d.hidden_dim, d.action_embed_dim, d.status_projection_dim};
}

void bssimt_synth_config_default(bssimt_synth_config* c) {
  if (!c) return;
  const SyntheticTaskSpec d;
  *c = {d.vocab_size, d.min_length, d.max_length, d.lookahead, d.seed, 2000, 200};
}

bssimt_status bssimt_synth_write(const bssimt_synth_config* config, const char* out_dir) {
  return guard([&] {
    const auto& c = need(config, "config");
    const std::filesystem::path dir = need_path(out_dir, "output directory");
    if (c.train_count < 1 || c.test_count < 1) usage_error("split sizes must be at least 1");
    const SyntheticTaskSpec spec{c.vocab_size, c.min_length, c.max_length, c.lookahead, c.seed};
    const auto pairs = generate_synthetic(
        spec, static_cast<std::size_t>(c.train_count) + static_cast<std::size_t>(c.test_count));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) data_error("cannot create " + dir.string() + ": " + ec.message());
    auto emit = [&](const std::string& name, std::size_t begin, std::size_t end) {
      auto src = open_out((dir / (name + ".src")).string());
      auto tgt = open_out((dir / (name + ".tgt")).string());
      std::vector<AlignmentSet> align;
      for (std::size_t k = begin; k < end; ++k) {
        write_tokens(src, synthetic_source_text(pairs[k].source));
        write_tokens(tgt, synthetic_target_text(pairs[k].target));
        align.push_back(synthetic_alignment(spec, pairs[k]));
      }
      if (!src || !tgt) data_error("failed writing " + name + " split");
      save_alignments(dir / (name + ".align"), align);
    };
    emit("train", 0, static_cast<std::size_t>(c.train_count));
    emit("test", static_cast<std::size_t>(c.train_count), pairs.size());
  });
}

bssimt_status bssimt_vocab_build(const char* text_path, int min_freq, bssimt_vocab** out) {
  return guard([&] {
    auto& o = need(out, "out");
    const auto lines = read_tokenized_lines(need_path(text_path, "text"));
    o = new bssimt_vocab{Vocabulary::build(lines, min_freq)};
  });
}

bssimt_status bssimt_vocab_load(const char* path, bssimt_vocab** out) {
  return guard([&] {
    auto& o = need(out, "out");
    o = new bssimt_vocab{Vocabulary::load(need_path(path, "vocabulary"))};
  });
}

bssimt_status bssimt_vocab_save(const bssimt_vocab* vocab, const char* path) {
  return guard([&] { need(vocab, "vocab").vocab.save(need_path(path, "vocabulary")); });
}

bssimt_status bssimt_vocab_size(const bssimt_vocab* vocab, size_t* size) {
  return guard([&] { need(size, "size") = need(vocab, "vocab").vocab.size(); });
}

bssimt_status bssimt_vocab_encode(const bssimt_vocab* vocab, const char* token, int32_t* id) {
  return guard([&] {
    if (!token) usage_error("token must not be NULL");
    need(id, "id") = need(vocab, "vocab").vocab.encode(std::string_view(token));
  });
}

void bssimt_vocab_free(bssimt_vocab* vocab) { delete vocab; }

bssimt_status bssimt_model_create(const bssimt_model_config* config,
                                  const bssimt_vocab* source_vocab,
                                  const bssimt_vocab* target_vocab, uint64_t seed,
                                  bssimt_model** out) {
  return guard([&] {
    const auto& c = need(config, "config");
    auto& o = need(out, "out");
    ModelConfig mc;
    mc.encoder_layers = c.encoder_layers;
    mc.decoder_layers = c.decoder_layers;
    mc.heads = c.heads;
    mc.embed_dim = c.embed_dim;
    mc.ffn_dim = c.ffn_dim;
    mc.dropout = c.dropout;
    mc.label_smoothing = c.label_smoothing;
    o = new bssimt_model{Scorer(mc, need(source_vocab, "source vocab").vocab,
                                need(target_vocab, "target vocab").vocab, seed)};
  });
}

bssimt_status bssimt_model_load(const char* path, bssimt_model** out) {
  return guard([&] {
    auto& o = need(out, "out");
    o = new bssimt_model{Scorer::load(need_path(path, "model"))};
  });
}

bssimt_status bssimt_model_save(const bssimt_model* model, const char* path) {
  return guard([&] { need(model, "model").scorer.save(need_path(path, "model")); });
}

bssimt_status bssimt_model_parameter_count(const bssimt_model* model, size_t* count) {
  return guard([&] { need(count, "count") = need(model, "model").scorer.parameter_count(); });
}

bssimt_status bssimt_model_target_vocab_size(const bssimt_model* model, size_t* size) {
  return guard([&] { need(size, "size") = need(model, "model").scorer.target_vocab().size(); });
}

void bssimt_model_free(bssimt_model* model) { delete model; }

bssimt_status bssimt_model_train_multipath(bssimt_model* model, const char* source_path,
                                           const char* target_path,
                                           const bssimt_train_config* config, int fixed_k,
                                           double* final_loss) {
  return guard([&] {
    auto& m = need(model, "model");
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const auto r = train_multipath(m.scorer, pairs, to_schedule(need(config, "config")),
                                   fixed_k > 0 ? std::optional<int>(fixed_k) : std::nullopt);
    if (final_loss) *final_loss = r.final_loss;
  });
}

bssimt_status bssimt_model_train_full(bssimt_model* model, const char* source_path,
                                      const char* target_path, const bssimt_train_config* config,
                                      double* final_loss) {
  return guard([&] {
    auto& m = need(model, "model");
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const auto r = train_full_sentence(m.scorer, pairs, to_schedule(need(config, "config")));
    if (final_loss) *final_loss = r.final_loss;
  });
}

bssimt_status bssimt_model_train_policy(bssimt_model* model, const char* source_path,
                                        const char* target_path, const char* policy_path,
                                        const bssimt_train_config* config, double* final_loss) {
  return guard([&] {
    auto& m = need(model, "model");
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const auto policies = load_matching_policies(policy_path, pairs);
    const auto r = train_policy_ce(m.scorer, pairs, policies, to_schedule(need(config, "config")));
    if (final_loss) *final_loss = r.final_loss;
  });
}

bssimt_status bssimt_model_score_prefix(const bssimt_model* model, const int32_t* source,
                                        size_t source_len, const int32_t* prefix, size_t prefix_len,
                                        int read_count, double* out, size_t out_len) {
  return guard([&] {
    const auto& m = need(model, "model");
    if (!source || !prefix) usage_error("source and prefix must not be NULL");
    if (!out || out_len != m.scorer.target_vocab().size()) {
      usage_error("output buffer must hold the target vocabulary size");
    }
    PrefixQuery q{TokenSeq(source, source + source_len), TokenSeq(prefix, prefix + prefix_len),
                  read_count};
    const auto dist = m.scorer.score_prefix(q);
    std::copy(dist.begin(), dist.end(), out);
  });
}

bssimt_status bssimt_search(const bssimt_model* model, const char* source_path,
                            const char* target_path, int l1, int r1, bssimt_search_method method,
                            int workers, const char* policy_out, const char* trace_out) {
  return guard([&] {
    const auto& m = need(model, "model");
    const std::string out = need_path(policy_out, "policy output");
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const IntervalSchedule sched{l1, r1};
    std::vector<Policy> policies;
    if (method == BSSIMT_SEARCH_BINARY) {
      std::vector<SearchTrace> traces;
      policies = search_policies(m.scorer, pairs, sched, workers, trace_out ? &traces : nullptr);
      if (trace_out) {
        auto t = open_out(trace_out);
        write_search_trace(t, traces);
      }
    } else if (method == BSSIMT_SEARCH_GT_COMPARISON) {
      policies = gt_comparison_policies(m.scorer, pairs, sched, workers);
    } else {
      usage_error("unknown search method");
    }
    save_policies(out, policies);
  });
}

bssimt_status bssimt_alternate_train(bssimt_model* model, const char* train_source,
                                     const char* train_target, const char* dev_source,
                                     const char* dev_target, int l1, int r1, int rounds,
                                     const bssimt_train_config* config, const char* policy_out,
                                     bssimt_alternate_report* report) {
  return guard([&] {
    auto& m = need(model, "model");
    const std::string out = need_path(policy_out, "policy output");
    const auto train = load_pairs(m.scorer, train_source, train_target);
    const auto dev = load_pairs(m.scorer, dev_source, dev_target);
    AlternateOptions opt;
    opt.rounds = rounds;
    opt.schedule = IntervalSchedule{l1, r1};
    opt.training = to_schedule(need(config, "config"));
    auto result = alternate_train(m.scorer, train, dev, opt);
    save_policies(out, result.policies);
    if (report) {
      report->best_round = result.best_round;
      report->best_dev_bleu = result.dev_bleu[static_cast<std::size_t>(result.best_round - 1)];
    }
    m.scorer = std::move(result.best);
  });
}

bssimt_status bssimt_agent_create(const bssimt_agent_config* config, const bssimt_model* model,
                                  uint64_t seed, bssimt_agent** out) {
  return guard([&] {
    const auto& c = need(config, "config");
    auto& o = need(out, "out");
    const AgentConfig ac{c.hidden_dim, c.action_embed_dim, c.status_projection_dim};
    o = new bssimt_agent{Agent(ac, need(model, "model").scorer.config().embed_dim, seed)};
  });
}

bssimt_status bssimt_agent_load(const char* path, bssimt_agent** out) {
  return guard([&] {
    auto& o = need(out, "out");
    o = new bssimt_agent{Agent::load(need_path(path, "agent"))};
  });
}

bssimt_status bssimt_agent_save(const bssimt_agent* agent, const char* path) {
  return guard([&] { need(agent, "agent").agent.save(need_path(path, "agent")); });
}

void bssimt_agent_free(bssimt_agent* agent) { delete agent; }

bssimt_status bssimt_agent_train(bssimt_agent* agent, const bssimt_model* model,
                                 const char* source_path, const char* target_path,
                                 const char* policy_path, int ground_truth_status,
                                 const bssimt_train_config* config, const char* heldout_source,
                                 const char* heldout_target, const char* heldout_policy,
                                 double* final_loss, double* heldout_accuracy) {
  return guard([&] {
    auto& a = need(agent, "agent");
    const auto& m = need(model, "model");
    const TrainSchedule sched = to_schedule(need(config, "config"));
    if (a.agent.embed_dim() != m.scorer.config().embed_dim) {
      usage_error("agent and model embedding sizes differ");
    }
    const StatusMode mode = ground_truth_status ? StatusMode::GroundTruth : StatusMode::Generated;
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const auto policies = load_matching_policies(policy_path, pairs);
    const auto episodes = make_training_episodes(m.scorer, pairs, policies, mode, sched.workers);
    const StatusEmbeddings emb = StatusEmbeddings::from(m.scorer);
    const auto r = train_agent(a.agent, emb, episodes, sched);
    if (final_loss) *final_loss = r.final_loss;
    if (heldout_source || heldout_target || heldout_policy) {
      const auto hp = load_pairs(m.scorer, heldout_source, heldout_target);
      const auto hpol = load_matching_policies(heldout_policy, hp);
      const auto heps = make_training_episodes(m.scorer, hp, hpol, mode, sched.workers);
      const double acc = action_accuracy(a.agent, emb, heps, sched.workers);
      if (heldout_accuracy) *heldout_accuracy = acc;
    }
  });
}

void bssimt_decode_options_default(bssimt_decode_options* o) {
  if (!o) return;
  *o = {BSSIMT_DECODE_AGENT, nullptr, 0.5, 3, nullptr, 1};
}

bssimt_status bssimt_decode(const bssimt_model* model, const char* source_path,
                            const bssimt_decode_options* options, const char* hypothesis_out,
                            const char* policy_out, const char* actions_out) {
  return guard([&] {
    const auto& m = need(model, "model");
    const auto& o = need(options, "options");
    const std::string hyp_path = need_path(hypothesis_out, "hypothesis output");
    const auto sources = load_sources(m.scorer, source_path);
    std::vector<Policy> policies;
    std::optional<StatusEmbeddings> emb;
    DriverFactory factory;
    switch (o.mode) {
      case BSSIMT_DECODE_AGENT:
        if (!o.agent) usage_error("agent decoding needs an agent");
        if (o.agent->agent.embed_dim() != m.scorer.config().embed_dim) {
          usage_error("agent and model embedding sizes differ");
        }
        emb = StatusEmbeddings::from(m.scorer);
        factory = [&](std::size_t) {
          return std::make_unique<AgentDriver>(o.agent->agent, *emb, o.threshold);
        };
        break;
      case BSSIMT_DECODE_ORACLE:
        policies = load_policies(need_path(o.policy_path, "policy"));
        if (policies.size() != sources.size()) data_error("policy count differs from source count");
        for (std::size_t k = 0; k < sources.size(); ++k) {
          try {
            validate_policy(policies[k], static_cast<int>(sources[k].size()));
          } catch (const Error& e) {
            data_error(std::string(o.policy_path) + ": line " + std::to_string(k + 1) + ": " + e.what());
          }
        }
        break;
      case BSSIMT_DECODE_WAITK:
        if (o.k < 1) usage_error("k must be at least 1");
        for (const auto& s : sources) {
          const int J = static_cast<int>(s.size());
          policies.push_back(waitk_policy(o.k, length_cap(J), J));
        }
        break;
      case BSSIMT_DECODE_FULL:
        for (const auto& s : sources) policies.push_back(full_sentence_policy(1, static_cast<int>(s.size())));
        break;
      default:
        usage_error("unknown decode mode");
    }
    if (!factory) factory = [&](std::size_t k) { return std::make_unique<PolicyDriver>(policies[k]); };
    const auto decoded = decode_corpus(m.scorer, sources, factory, o.workers);
    auto hyp = open_out(hyp_path);
    for (const auto& d : decoded) write_tokens(hyp, m.scorer.target_vocab().decode(d.hypothesis));
    if (!hyp) data_error("failed writing " + hyp_path);
    if (policy_out) {
      std::vector<Policy> realized;
      for (const auto& d : decoded) realized.push_back(d.realized_policy);
      save_policies(policy_out, realized);
    }
    if (actions_out) {
      std::vector<ActionSequence> logs;
      for (const auto& d : decoded) logs.push_back(d.action_log);
      save_actions(actions_out, logs);
    }
  });
}

bssimt_status bssimt_eval_files(const char* hypothesis_path, const char* reference_path,
                                const char* policy_path, const char* source_path,
                                const char* alignment_path, bssimt_eval_report* report) {
  return guard([&] {
    auto& rep = need(report, "report");
    const auto hyps = read_tokenized_lines(need_path(hypothesis_path, "hypothesis"));
    const auto refs = read_tokenized_lines(need_path(reference_path, "reference"));
    const auto policies = load_policies(need_path(policy_path, "policy"));
    const auto sources = read_tokenized_lines(need_path(source_path, "source"));
    if (hyps.size() != refs.size() || hyps.size() != policies.size() || hyps.size() != sources.size()) {
      data_error("hypothesis, reference, policy and source files differ in line count");
    }
    std::vector<int> lengths;
    for (const auto& s : sources) lengths.push_back(static_cast<int>(s.size()));
    for (std::size_t k = 0; k < hyps.size(); ++k) {
      if (policies[k].length() != static_cast<int>(hyps[k].size())) {
        data_error(std::string(policy_path) + ": line " + std::to_string(k + 1) +
                   " does not match the hypothesis length");
      }
    }
    std::optional<std::vector<AlignmentSet>> align;
    if (alignment_path) {
      align = load_alignments(alignment_path);
      if (align->size() != hyps.size()) data_error("alignment count differs from corpus size");
    }
    DecodeReport r;
    try {
      r = evaluate_text(hyps, refs, policies, lengths, align ? &*align : nullptr);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Usage) data_error(e.what());
      throw;
    }
    rep.al = r.al;
    rep.bleu = r.bleu;
    rep.has_sufficiency = r.sufficiency.has_value();
    rep.sufficiency = r.sufficiency.value_or(0.0);
    rep.empty_hypotheses = r.empty_hypotheses;
  });
}

bssimt_status bssimt_sweep(const bssimt_model* model, const bssimt_sweep_item* items,
                           size_t item_count, const char* source_path, const char* target_path,
                           const char* alignment_path, int workers, const char* csv_out,
                           const char* json_out) {
  return guard([&] {
    const auto& m = need(model, "model");
    const std::string csv_path = need_path(csv_out, "CSV output");
    if (!items || item_count == 0) usage_error("no sweep configurations");
    std::vector<SweepConfig> configs;
    for (size_t k = 0; k < item_count; ++k) {
      const auto& it = items[k];
      switch (it.kind) {
        case BSSIMT_SWEEP_ORACLE:
          configs.push_back(SweepConfig::oracle({it.l1, it.r1}));
          break;
        case BSSIMT_SWEEP_GT_COMPARISON:
          configs.push_back(SweepConfig::gt_comparison({it.l1, it.r1}));
          break;
        case BSSIMT_SWEEP_WAITK:
          configs.push_back(SweepConfig::waitk(it.k));
          break;
        case BSSIMT_SWEEP_AGENT:
          if (!it.agent) usage_error("agent sweep item without an agent");
          configs.push_back(SweepConfig::agent_threshold(it.agent->agent, it.threshold));
          break;
        case BSSIMT_SWEEP_FULL:
          configs.push_back(SweepConfig::full_sentence());
          break;
        default:
          usage_error("unknown sweep kind");
      }
    }
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    std::optional<std::vector<AlignmentSet>> align;
    if (alignment_path) {
      align = load_alignments(alignment_path);
      if (align->size() != pairs.size()) data_error("alignment count differs from corpus size");
    }
    const auto rows = run_sweep(m.scorer, configs, pairs, align ? &*align : nullptr, workers);
    auto csv = open_out(csv_path);
    write_sweep_csv(csv, rows);
    if (!csv) data_error("failed writing " + csv_path);
    if (json_out) {
      auto js = open_out(json_out);
      write_sweep_json(js, rows);
    }
  });
}

bssimt_status bssimt_profile(const bssimt_model* model, const char* source_path,
                             const char* target_path, int target_length, const double* q_grid,
                             size_t q_count, int workers, const char* csv_out) {
  return guard([&] {
    const auto& m = need(model, "model");
    const std::string out = need_path(csv_out, "CSV output");
    if (!q_grid || q_count == 0) usage_error("empty q grid");
    const auto pairs = load_pairs(m.scorer, source_path, target_path);
    const auto bucket = length_bucket(pairs, target_length);
    if (bucket.empty()) {
      data_error("no pair has target length " + std::to_string(target_length));
    }
    const auto points = probability_profile(m.scorer, bucket,
                                            std::vector<double>(q_grid, q_grid + q_count), workers);
    auto csv = open_out(out);
    write_profile_csv(csv, points);
  });
}

}  // extern "C"
