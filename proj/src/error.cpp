#include "bridge/error.hpp"

namespace bridge {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse error";
    case ErrorCode::ordering: return "ordering error";
    case ErrorCode::config: return "config error";
    case ErrorCode::insufficient_data: return "insufficient data";
    case ErrorCode::degenerate_data: return "degenerate data";
    case ErrorCode::shape: return "shape mismatch";
    case ErrorCode::numeric: return "numeric error";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::simulation: return "simulation error";
  }
  return "unknown error";
}

}  // namespace bridge
