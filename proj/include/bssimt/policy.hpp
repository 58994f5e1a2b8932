#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bssimt {

/// Read counts g_1..g_I: reads[i-1] source tokens are visible when target
/// token i is produced.
struct Policy {
  std::vector<int> reads;

  int length() const { return static_cast<int>(reads.size()); }
  int operator[](int i) const { return reads[static_cast<std::size_t>(i - 1)]; }

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// First-token interval [l1, r1]; each later target token shifts it one
/// source token to the right.
struct IntervalSchedule {
  int l1 = 3;
  int r1 = 7;

  void validate() const;
  friend bool operator==(const IntervalSchedule&, const IntervalSchedule&) = default;
};

/// Interval of target token i (1-based) clamped to the source length.
std::pair<int, int> interval_for(const IntervalSchedule& schedule, int i, int source_length);

/// Wait-k: g_i = min(k + i - 1, J).
Policy waitk_policy(int k, int target_length, int source_length);

/// g_i = J for every target token.
Policy full_sentence_policy(int target_length, int source_length);

/// Running maximum: the smallest non-decreasing sequence dominating `raw`.
Policy monotone_project(std::span<const int> raw);

bool is_monotone(const Policy& policy);

/// Throws unless the policy is non-decreasing with 1 <= g_i <= J.
void validate_policy(const Policy& policy, int source_length);

double mean_lag(const Policy& policy);  // mean of g_i - i

std::string format_policy(const Policy& policy);
Policy parse_policy(std::string_view line, std::size_t line_number = 1);

/// One line per sentence, space-separated read counts.
void save_policies(const std::filesystem::path& path, const std::vector<Policy>& policies);
std::vector<Policy> load_policies(const std::filesystem::path& path);

}  // namespace bssimt
