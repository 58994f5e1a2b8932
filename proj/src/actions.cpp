#include "bssimt/actions.hpp"

#include <fstream>

#include "bssimt/error.hpp"

namespace bssimt {

ActionSequence policy_to_actions(const Policy& policy, int source_length) {
  validate_policy(policy, source_length);
  const int target_length = policy.length();
  ActionSequence actions(static_cast<std::size_t>(target_length + source_length), Action::Read);
  for (int i = 1; i <= target_length; ++i) {
    actions[static_cast<std::size_t>(policy[i] + i - 1)] = Action::Write;
  }
  return actions;
}

Policy actions_to_policy(std::span<const Action> actions) {
  Policy p;
  int reads = 0;
  for (Action a : actions) {
    if (a == Action::Read) {
      ++reads;
    } else {
      p.reads.push_back(reads);
    }
  }
  if (p.reads.empty()) usage_error("action sequence has no WRITE");
  return p;
}

void validate_actions(std::span<const Action> actions, int target_length, int source_length) {
  long writes = 0, reads = 0;
  for (Action a : actions) (a == Action::Write ? writes : reads)++;
  if (static_cast<long>(actions.size()) != target_length + source_length) {
    usage_error("action sequence length " + std::to_string(actions.size()) + " != I + J = " +
                std::to_string(target_length + source_length));
  }
  if (writes != target_length) {
    usage_error("action sequence has " + std::to_string(writes) + " WRITEs, expected " +
                std::to_string(target_length));
  }
  if (reads != source_length) {
    usage_error("action sequence has " + std::to_string(reads) + " READs, expected " +
                std::to_string(source_length));
  }
  if (!actions.empty() && actions.front() == Action::Write) {
    usage_error("action sequence writes before reading any source token");
  }
}

char action_char(Action a) { return a == Action::Read ? 'R' : 'W'; }

std::string format_actions(std::span<const Action> actions) {
  std::string out;
  out.reserve(actions.size());
  for (Action a : actions) out += action_char(a);
  return out;
}

ActionSequence parse_actions(std::string_view line, std::size_t line_number) {
  ActionSequence out;
  for (char c : line) {
    if (c == 'R') {
      out.push_back(Action::Read);
    } else if (c == 'W') {
      out.push_back(Action::Write);
    } else if (c != ' ' && c != '\t' && c != '\r') {
      data_error("line " + std::to_string(line_number) + ": bad action character '" +
                 std::string(1, c) + "'");
    }
  }
  return out;
}

void save_actions(const std::filesystem::path& path, const std::vector<ActionSequence>& seqs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot write " + path.string());
  for (const auto& s : seqs) out << format_actions(s) << '\n';
}

std::vector<ActionSequence> load_actions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  std::vector<ActionSequence> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) out.push_back(parse_actions(line, ++n));
  return out;
}

}  // namespace bssimt
