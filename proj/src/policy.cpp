#include "bssimt/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bssimt/error.hpp"

namespace bssimt {

void IntervalSchedule::validate() const {
  if (l1 < 1 || r1 < l1) {
    usage_error("interval [" + std::to_string(l1) + ", " + std::to_string(r1) +
                "] must satisfy 1 <= l1 <= r1");
  }
}

std::pair<int, int> interval_for(const IntervalSchedule& schedule, int i, int source_length) {
  if (i < 1 || source_length < 1) usage_error("interval_for needs i >= 1 and J >= 1");
  return {std::min(schedule.l1 + i - 1, source_length),
          std::min(schedule.r1 + i - 1, source_length)};
}

Policy waitk_policy(int k, int target_length, int source_length) {
  if (k < 1) usage_error("wait-k needs k >= 1");
  Policy p;
  p.reads.reserve(static_cast<std::size_t>(target_length));
  for (int i = 1; i <= target_length; ++i) p.reads.push_back(std::min(k + i - 1, source_length));
  return p;
}

Policy full_sentence_policy(int target_length, int source_length) {
  return Policy{std::vector<int>(static_cast<std::size_t>(target_length), source_length)};
}

Policy monotone_project(std::span<const int> raw) {
  Policy p;
  p.reads.reserve(raw.size());
  int running = 0;
  for (int g : raw) {
    running = std::max(running, g);
    p.reads.push_back(running);
  }
  return p;
}

bool is_monotone(const Policy& policy) {
  return std::is_sorted(policy.reads.begin(), policy.reads.end());
}

void validate_policy(const Policy& policy, int source_length) {
  if (!is_monotone(policy)) usage_error("policy is not monotone: " + format_policy(policy));
  for (int g : policy.reads) {
    if (g < 1 || g > source_length) {
      usage_error("policy read count " + std::to_string(g) + " outside [1, " +
                  std::to_string(source_length) + "]");
    }
  }
}

double mean_lag(const Policy& policy) {
  if (policy.reads.empty()) return 0.0;
  double sum = 0.0;
  for (int i = 1; i <= policy.length(); ++i) sum += policy[i] - i;
  return sum / policy.length();
}

std::string format_policy(const Policy& policy) {
  std::string out;
  for (int g : policy.reads) {
    if (!out.empty()) out += ' ';
    out += std::to_string(g);
  }
  return out;
}

Policy parse_policy(std::string_view line, std::size_t line_number) {
  Policy p;
  std::istringstream ss{std::string(line)};
  std::string item;
  while (ss >> item) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 1) {
      data_error("line " + std::to_string(line_number) + ": bad read count '" + item + "'");
    }
    p.reads.push_back(static_cast<int>(v));
  }
  return p;
}

void save_policies(const std::filesystem::path& path, const std::vector<Policy>& policies) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot write " + path.string());
  for (const auto& p : policies) out << format_policy(p) << '\n';
}

std::vector<Policy> load_policies(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  std::vector<Policy> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(parse_policy(line, n));
  }
  return out;
}

}  // namespace bssimt
