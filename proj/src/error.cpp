#include "ctune/error.hpp"

namespace ctune {

const char* errc_name(errc code) {
  switch (code) {
    case errc::ok: return "OK";
    case errc::malformed_line: return "MALFORMED_LINE";
    case errc::missing_required_key: return "MISSING_REQUIRED_KEY";
    case errc::duplicate_key: return "DUPLICATE_KEY";
    case errc::bad_value: return "BAD_VALUE";
    case errc::dataset_mismatch: return "DATASET_MISMATCH";
    case errc::zero_time: return "ZERO_TIME";
    case errc::incorrect_output: return "INCORRECT_OUTPUT";
    case errc::dangling_reference: return "DANGLING_REFERENCE";
    case errc::storage_failure: return "STORAGE_FAILURE";
    case errc::version_mismatch: return "VERSION_MISMATCH";
    case errc::unknown_case: return "UNKNOWN_CASE";
    case errc::compiler_not_found: return "COMPILER_NOT_FOUND";
    case errc::compile_failed: return "COMPILE_FAILED";
    case errc::run_failed: return "RUN_FAILED";
    case errc::timeout: return "TIMEOUT";
    case errc::missing_reference: return "MISSING_REFERENCE";
    case errc::unsupported_runtime: return "UNSUPPORTED_RUNTIME";
    case errc::length_exceeds_space: return "LENGTH_EXCEEDS_SPACE";
    case errc::evaluation_failed: return "EVALUATION_FAILED";
    case errc::baseline_failed: return "BASELINE_FAILED";
    case errc::empty_input: return "EMPTY_INPUT";
    case errc::insufficient_data: return "INSUFFICIENT_DATA";
    case errc::model_mismatch: return "MODEL_MISMATCH";
    case errc::empty_feature_vector: return "EMPTY_FEATURE_VECTOR";
    case errc::empty_trace: return "EMPTY_TRACE";
    case errc::no_candidates: return "NO_CANDIDATES";
    case errc::usage: return "USAGE";
    case errc::internal: return "INTERNAL";
  }
  return "INTERNAL";
}

}  // namespace ctune
