#pragma once

#include <stdexcept>
#include <string>

namespace bssimt {

// Numeric values double as CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void usage_error(const std::string& message) {
  throw Error(ErrorKind::Usage, message);
}

[[noreturn]] inline void data_error(const std::string& message) {
  throw Error(ErrorKind::Data, message);
}

[[noreturn]] inline void numeric_error(const std::string& message) {
  throw Error(ErrorKind::Numeric, message);
}

}  // namespace bssimt
