#pragma once

#include <stdexcept>
#include <string>

namespace bridge {

// Mirrors bridge_status in bridge.h; keep the numeric values in sync.
enum class ErrorCode : int {
  parse = 2,
  ordering = 3,
  config = 4,
  insufficient_data = 5,
  degenerate_data = 6,
  shape = 7,
  numeric = 8,
  io = 9,
  simulation = 10,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bridge
