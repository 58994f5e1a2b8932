#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bssimt/policy.hpp"

namespace bssimt {

enum class Action : std::uint8_t { Read = 0, Write = 1 };

using ActionSequence = std::vector<Action>;

/// a_t = WRITE iff t = g_i + i for some i; every other step up to I + J is a
/// READ, including the trailing reads after the last write.
ActionSequence policy_to_actions(const Policy& policy, int source_length);

/// g_i = number of READs before the i-th WRITE.
Policy actions_to_policy(std::span<const Action> actions);

/// Throws with a description of the first violated count.
void validate_actions(std::span<const Action> actions, int target_length, int source_length);

char action_char(Action a);
std::string format_actions(std::span<const Action> actions);
ActionSequence parse_actions(std::string_view line, std::size_t line_number = 1);

void save_actions(const std::filesystem::path& path, const std::vector<ActionSequence>& seqs);
std::vector<ActionSequence> load_actions(const std::filesystem::path& path);

}  // namespace bssimt
