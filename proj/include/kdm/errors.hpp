#pragma once

#include <stdexcept>
#include <string>

namespace kdm {

/// Error categories surfaced by the library. The CLI maps `usage`-class
/// codes to exit 2 and `internal`-class codes to exit 1.
enum class ErrorCode {
  zero_vector,
  dim_mismatch,
  shape_mismatch,
  bad_weights,
  kernel_mismatch,
  wrong_kernel_kind,
  label_shape_mismatch,
  empty_dataset,
  non_finite_loss,
  parse_error,
  missing_value,
  insufficient_class_instances,
  bad_fractions,
  model_data_mismatch,
  single_class,
  bad_config,
  io_error,
};

const char* error_code_name(ErrorCode code);

/// True for codes caused by bad user input (CLI exit 2); false for
/// numerical/internal failures (CLI exit 1).
bool is_usage_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kdm
