#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bssimt::cli {

enum class ValueType { Text, Path, Int, Count, Real, Flag };

struct KeySpec {
  std::string key;
  ValueType type;
  std::string default_value;
  std::string help;
  std::vector<std::string> commands;  // commands that read this key
};

struct CommandSpec {
  std::string name;
  std::string description;
};

const std::vector<CommandSpec>& commands();
const std::vector<KeySpec>& key_specs();
const KeySpec* find_key(std::string_view key);
bool command_uses(const KeySpec& spec, std::string_view command);

/// Thrown for malformed configuration; the CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Effective key/value configuration of one command. Keys follow the schema
/// above; values are validated on assignment.
class RunConfig {
 public:
  explicit RunConfig(std::string command);

  const std::string& command() const { return command_; }

  void set(std::string_view key, std::string_view value);
  const std::string& text(std::string_view key) const;
  long integer(std::string_view key) const;
  std::uint64_t count(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;

  /// "key = value" lines. Keys that belong to other commands are ignored so
  /// one file can serve a whole pipeline; unknown keys are errors.
  void merge_text(std::string_view text, std::string_view origin = "config");
  void merge_file(const std::filesystem::path& path);

  std::string serialize() const;
  static RunConfig parse(std::string_view text, std::string command);
  std::uint64_t hash() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  const KeySpec& spec(std::string_view key) const;

  std::string command_;
  std::map<std::string, std::string, std::less<>> values_;
};

std::uint64_t hash_bytes(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Parses "3:7,5:9" into (l1, r1) pairs.
std::vector<std::pair<int, int>> parse_intervals(std::string_view text);
std::vector<double> parse_reals(std::string_view text);
std::vector<int> parse_ints(std::string_view text);

}  // namespace bssimt::cli
