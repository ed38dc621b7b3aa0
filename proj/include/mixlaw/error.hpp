#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixlaw {

enum class ErrorCode {
  invariant_violation,
  unknown_weighting,
  missing_baseline,
  domain_error,
  zero_shot,
  insufficient_data,
  rank_deficiency,
  degenerate_weighting,
  parse_error,
  empty_dataset,
  missing_metric,
  version_mismatch,
  corruption,
  coverage,
  missing_task,
  missing_fraction_fit,
  io_error,
  fit_failure,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mixlaw
