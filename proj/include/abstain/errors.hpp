#pragma once

#include <stdexcept>
#include <string>

namespace abstain {

// Stable machine-readable error codes; the CLI maps them to JSON on stderr.
enum class ErrorCode {
  no_positive,
  ragged_k,
  parse_error,
  empty_file,
  empty_dataset,
  degenerate_design,
  dimension_mismatch,
  empty_class,
  too_few_samples,
  singular_covariance,
  too_few_points,
  degenerate_oracle,
  invalid_alpha,
  unreachable_target,
  too_small_to_split,
  reference_too_small,
  zero_variance,
  schema_error,
  invalid_config,
  file_exists,
  io_error,
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

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace abstain
