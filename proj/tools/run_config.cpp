#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bssimt::cli {

namespace {

using V = ValueType;

const std::vector<std::string> kTrainers{"train-multipath", "alternate-train"};

std::vector<std::string> all_commands() {
  std::vector<std::string> out;
  for (const auto& c : commands()) out.push_back(c.name);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(sep, start), text.size());
    const std::string item = trim(text.substr(start, end - start));
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

template <typename T>
bool parse_whole(std::string_view s, T& value) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, value);
  return r.ec == std::errc() && r.ptr == end;
}

bool parse_real(const std::string& s, double& value) {
  if (s.empty()) return false;
  char* end = nullptr;
  value = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(value);
}

}  // namespace

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs{
      {"synth-data", "Generate the synthetic lookahead task (train and test splits)"},
      {"make-vocab", "Build source and target vocabularies from a parallel corpus"},
      {"train-multipath", "Train a translation model with multi-path (uniform wait-k) sampling"},
      {"search", "Search read-count policies for a parallel corpus"},
      {"alternate-train", "Alternate policy search and policy-conditioned training"},
      {"train-agent", "Train the READ/WRITE agent on searched policies"},
      {"decode", "Simultaneous decoding with an agent, a policy file, wait-k or the full source"},
      {"eval", "Latency, BLEU and sufficiency of decoded output"},
      {"sweep", "Decode a test set under several configurations and report AL/BLEU"},
      {"profile", "Teacher-forced probability profile over source prefixes"},
  };
  return specs;
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    const auto all = all_commands();
    const std::vector<std::string> model_users{"search", "alternate-train", "train-agent",
                                               "decode", "sweep", "profile", "train-multipath"};
    const std::vector<std::string> corpus_users{"make-vocab", "train-multipath", "search",
                                                "alternate-train", "train-agent", "sweep", "profile"};
    std::vector<KeySpec> s{
        {"seed", V::Count, "1", "Seed for every stochastic choice", all},
        {"workers", V::Int, "1", "Worker threads", all},
        {"out_dir", V::Path, "out", "Output directory", all},

        {"vocab_size", V::Int, "32", "Synthetic symbol count", {"synth-data"}},
        {"min_length", V::Int, "8", "Shortest synthetic source", {"synth-data"}},
        {"max_length", V::Int, "20", "Longest synthetic source", {"synth-data"}},
        {"lookahead", V::Int, "2", "Source tokens of lookahead needed per target token", {"synth-data"}},
        {"train_count", V::Int, "2000", "Synthetic training pairs", {"synth-data"}},
        {"test_count", V::Int, "200", "Synthetic test pairs", {"synth-data"}},

        {"source", V::Path, "", "Source text, one tokenized sentence per line",
         [&] { auto c = corpus_users; c.push_back("decode"); c.push_back("eval"); return c; }()},
        {"target", V::Path, "", "Target text aligned with the source", corpus_users},
        {"min_freq", V::Int, "5", "Tokens rarer than this map to <unk>", {"make-vocab"}},
        {"source_vocab", V::Path, "", "Source vocabulary file", {"train-multipath"}},
        {"target_vocab", V::Path, "", "Target vocabulary file", {"train-multipath"}},
        {"model", V::Path, "", "Translation model checkpoint (train-multipath: optional start point)",
         model_users},

        {"encoder_layers", V::Int, "2", "Encoder blocks", {"train-multipath"}},
        {"decoder_layers", V::Int, "2", "Target self-attention and cross-attention blocks", {"train-multipath"}},
        {"heads", V::Int, "2", "Attention heads", {"train-multipath"}},
        {"embed_dim", V::Int, "64", "Model width", {"train-multipath"}},
        {"ffn_dim", V::Int, "128", "Feed-forward width", {"train-multipath"}},
        {"dropout", V::Real, "0.1", "Dropout rate", {"train-multipath"}},
        {"label_smoothing", V::Real, "0.1", "Label smoothing of the training loss", {"train-multipath"}},

        {"epochs", V::Int, "20", "Training epochs", kTrainers},
        {"batch_size", V::Int, "32", "Sentences per update", kTrainers},
        {"learning_rate", V::Real, "0.002", "Peak learning rate", kTrainers},
        {"warmup_steps", V::Int, "100", "Linear warmup updates", kTrainers},
        {"weight_decay", V::Real, "0", "Decoupled weight decay", kTrainers},
        {"clip_norm", V::Real, "1", "Gradient norm clip (0 disables)", kTrainers},
        {"max_steps", V::Int, "0", "Stop after this many updates (0: no cap)", kTrainers},
        {"fixed_k", V::Int, "0", "Train on wait-k with this k instead of sampling (0: sample)", {"train-multipath"}},

        {"l1", V::Int, "3", "Lower bound of the first token's search interval", {"search", "alternate-train"}},
        {"r1", V::Int, "7", "Upper bound of the first token's search interval", {"search", "alternate-train"}},
        {"method", V::Text, "binary", "Search method: binary or gt", {"search"}},
        {"trace", V::Flag, "0", "Also write the search trace", {"search"}},
        {"rounds", V::Int, "3", "Search/train rounds", {"alternate-train"}},
        {"dev_source", V::Path, "", "Held-out source for round selection", {"alternate-train"}},
        {"dev_target", V::Path, "", "Held-out target for round selection", {"alternate-train"}},

        {"policies", V::Path, "", "Policy file, one line of read counts per sentence",
         {"train-agent", "decode", "eval"}},
        {"agent", V::Path, "", "Agent checkpoint", {"decode", "sweep"}},
        {"hidden_dim", V::Int, "64", "Agent LSTM width", {"train-agent"}},
        {"action_embed_dim", V::Int, "64", "Agent action embedding width", {"train-agent"}},
        {"status_projection_dim", V::Int, "64", "Agent status projection width", {"train-agent"}},
        {"status_mode", V::Text, "generated", "Status tokens: generated or ground-truth", {"train-agent"}},
        {"agent_epochs", V::Int, "30", "Agent training epochs", {"train-agent"}},
        {"agent_batch_size", V::Int, "32", "Episodes per agent update", {"train-agent"}},
        {"agent_learning_rate", V::Real, "0.003", "Agent peak learning rate", {"train-agent"}},
        {"agent_warmup_steps", V::Int, "50", "Agent warmup updates", {"train-agent"}},
        {"heldout_source", V::Path, "", "Held-out source for action accuracy", {"train-agent"}},
        {"heldout_target", V::Path, "", "Held-out target for action accuracy", {"train-agent"}},
        {"heldout_policies", V::Path, "", "Held-out policies for action accuracy", {"train-agent"}},

        {"mode", V::Text, "agent", "Decoding driver: agent, oracle, waitk or full", {"decode"}},
        {"k", V::Int, "3", "Wait-k latency", {"decode"}},
        {"threshold", V::Real, "0.5", "Agent WRITE threshold", {"decode"}},

        {"hypotheses", V::Path, "", "Decoded hypotheses", {"eval"}},
        {"references", V::Path, "", "Reference translations", {"eval"}},
        {"alignments", V::Path, "", "Pharaoh alignments for sufficiency (optional)", {"eval", "sweep"}},

        {"intervals", V::Text, "3:7,5:9,7:11,9:13", "Oracle-policy schedules l1:r1,...", {"sweep"}},
        {"gt_intervals", V::Text, "", "Comparison-policy schedules l1:r1,...", {"sweep"}},
        {"waitk", V::Text, "", "Wait-k latencies, comma separated", {"sweep"}},
        {"thresholds", V::Text, "", "Agent thresholds, comma separated (needs agent)", {"sweep"}},
        {"full", V::Flag, "0", "Add a full-sentence row", {"sweep"}},

        {"target_length", V::Int, "10", "Target length of the profiled bucket", {"profile"}},
        {"q_grid", V::Text, "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1", "Source fractions q", {"profile"}},
    };
    return s;
  }();
  return specs;
}

const KeySpec* find_key(std::string_view key) {
  for (const auto& s : key_specs()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

bool command_uses(const KeySpec& spec, std::string_view command) {
  return std::find(spec.commands.begin(), spec.commands.end(), command) != spec.commands.end();
}

RunConfig::RunConfig(std::string command) : command_(std::move(command)) {
  const auto& cs = commands();
  if (std::none_of(cs.begin(), cs.end(), [&](const CommandSpec& c) { return c.name == command_; })) {
    throw ConfigError("unknown command '" + command_ + "'");
  }
  for (const auto& s : key_specs()) {
    if (command_uses(s, command_)) values_[s.key] = s.default_value;
  }
}

const KeySpec& RunConfig::spec(std::string_view key) const {
  const KeySpec* s = find_key(key);
  if (!s) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  if (!command_uses(*s, command_)) {
    throw ConfigError("key '" + std::string(key) + "' does not apply to " + command_);
  }
  return *s;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const KeySpec& s = spec(key);
  const std::string value = trim(raw);
  auto bad = [&](const char* what) {
    throw ConfigError("key '" + s.key + "': '" + value + "' is not " + what);
  };
  switch (s.type) {
    case V::Int: {
      long v = 0;
      if (!parse_whole(value, v)) bad("an integer");
      break;
    }
    case V::Count: {
      std::uint64_t v = 0;
      if (!parse_whole(value, v)) bad("a non-negative integer");
      break;
    }
    case V::Real: {
      double v = 0;
      if (!parse_real(value, v)) bad("a finite number");
      break;
    }
    case V::Flag:
      if (value != "0" && value != "1" && value != "true" && value != "false") bad("0/1/true/false");
      values_[s.key] = (value == "1" || value == "true") ? "1" : "0";
      return;
    case V::Text:
    case V::Path:
      if (value.find('\n') != std::string::npos) bad("a single line");
      break;
  }
  values_[s.key] = value;
}

const std::string& RunConfig::text(std::string_view key) const {
  spec(key);
  return values_.find(key)->second;
}

long RunConfig::integer(std::string_view key) const {
  long v = 0;
  parse_whole(std::string_view(text(key)), v);
  return v;
}

std::uint64_t RunConfig::count(std::string_view key) const {
  std::uint64_t v = 0;
  parse_whole(std::string_view(text(key)), v);
  return v;
}

double RunConfig::real(std::string_view key) const {
  double v = 0;
  parse_real(text(key), v);
  return v;
}

bool RunConfig::flag(std::string_view key) const { return text(key) == "1"; }

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    std::string line = raw_line;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ": expected key = value in '" + line + "'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    const KeySpec* s = find_key(key);
    if (!s) throw ConfigError(std::string(origin) + ": unknown key '" + key + "'");
    if (!command_uses(*s, command_)) continue;
    set(key, std::string_view(line).substr(eq + 1));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

std::string RunConfig::serialize() const {
  std::string out = "# " + command_ + "\n";
  for (const auto& s : key_specs()) {
    if (!command_uses(s, command_)) continue;
    out += s.key + " = " + values_.find(s.key)->second + "\n";
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text, std::string command) {
  RunConfig c(std::move(command));
  c.merge_text(text);
  return c;
}

std::uint64_t RunConfig::hash() const { return hash_bytes(serialize()); }

std::uint64_t hash_bytes(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::vector<std::pair<int, int>> parse_intervals(std::string_view text) {
  std::vector<std::pair<int, int>> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    int l = 0, r = 0;
    if (colon == std::string::npos || !parse_whole(std::string_view(item).substr(0, colon), l) ||
        !parse_whole(std::string_view(item).substr(colon + 1), r)) {
      throw ConfigError("bad interval '" + item + "' (expected l1:r1)");
    }
    out.emplace_back(l, r);
  }
  return out;
}

std::vector<double> parse_reals(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    double v = 0;
    if (!parse_real(item, v)) throw ConfigError("bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_ints(std::string_view text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    int v = 0;
    if (!parse_whole(std::string_view(item), v)) throw ConfigError("bad integer '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace bssimt::cli
