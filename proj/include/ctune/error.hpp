#pragma once

#include <stdexcept>
#include <string>

namespace ctune {

enum class errc {
  ok = 0,
  // packet format
  malformed_line,
  missing_required_key,
  duplicate_key,
  bad_value,
  // case derivation
  dataset_mismatch,
  zero_time,
  incorrect_output,
  // repository
  dangling_reference,
  storage_failure,
  version_mismatch,
  unknown_case,
  // drivers
  compiler_not_found,
  compile_failed,
  run_failed,
  timeout,
  missing_reference,
  unsupported_runtime,
  // search
  length_exceeds_space,
  evaluation_failed,
  baseline_failed,
  // filters / analysis
  empty_input,
  // predictor
  insufficient_data,
  model_mismatch,
  empty_feature_vector,
  // adaptation
  empty_trace,
  no_candidates,
  // cli / api
  usage,
  internal,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ctune
