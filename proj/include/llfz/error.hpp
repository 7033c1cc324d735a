#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llfz {

/// Stable error codes. The CLI prints them as `ERROR:<code>:<message>`.
enum class Errc {
  usage,
  io,
  dimension_mismatch,
  out_of_bounds,
  corrupt_stream,
  tau_mismatch,
  bound_violation,
  invalid_argument,
  model_mismatch,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::usage: return "usage";
    case Errc::io: return "io";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::corrupt_stream: return "corrupt_stream";
    case Errc::tau_mismatch: return "tau_mismatch";
    case Errc::bound_violation: return "bound_violation";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::model_mismatch: return "model_mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace llfz
