#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctune/records.hpp"

namespace ctune {

struct CompileOutcome {
  bool success = false;
  double compile_time = 0.0;
  uint64_t bin_size = 0;
  std::string obj_md5;
  std::string log;
  std::optional<FeatureVector> features;  // surrogate or externally supplied
};

struct RepeatTiming {
  double wall = 0.0;
  double user = 0.0;
  double sys = 0.0;
};

// Produced output files keyed by name, identified by content digest; the
// reference run captures these and later runs diff against them.
struct RunOutputs {
  std::vector<std::pair<std::string, std::string>> files;  // name -> md5

  bool matches(const RunOutputs& other) const { return files == other.files; }
};

struct RunOutcome {
  std::vector<RepeatTiming> times;  // exactly `repeats` entries
  bool output_correct = true;
  std::vector<std::pair<std::string, ProfileEntry>> profile;
  std::vector<std::pair<std::string, long long>> hardware_counters;
  RunOutputs outputs;
  std::string log;
  uint64_t noise_seed = 0;  // surrogate replay seed, recorded in notes
};

// Experiment environment, largely mirroring the CCC_* control variables.
struct DriverEnv {
  int runs = 1;                            // CCC_RUNS
  std::vector<std::string> platform_flags; // CCC_OPT_PLATFORM
  int processor_num = -1;                  // CCC_PROCESSOR_NUM (best-effort pin)
  std::string notes;                       // CCC_NOTES
  std::string run_re;                      // CCC_RUN_RE; only native execution is supported
  Aggregator aggregator = Aggregator::median;
  uint64_t seed = 0;                       // surrogate noise stream base
  std::string date;                        // override; empty means today
  std::string time;
  double compile_timeout = 300.0;          // seconds
  double run_timeout = 60.0;               // seconds per repeat
  std::optional<long> loop_wrapper;        // CCC_LOOP_WRAPPER override
  std::string counters_hook;               // command whose stdout is a counter packet
  std::string feature_pass;                // ICI_PROG_FEAT_PASS, stamped on feature packets

  // CCC_OPT_FINE and friends map onto the matching pass-through record
  // fields; leftover accepted-only variables land in the notes.
  std::vector<std::pair<std::string, std::string>> compilation_extensions;
  std::vector<std::pair<std::string, std::string>> execution_extensions;

  static DriverEnv from_environment();
};

// The "compile and run" abstraction behind ccc-comp / ccc-run.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual CompileOutcome compile(const ProgramDescriptor& program, const FlagCombination& flags,
                                 const DriverEnv& env) = 0;
  // With a reference, output_correct reports byte-equality of the produced
  // outputs against it for every repeat; without one, outputs are captured
  // as the new reference (the baseline run).
  virtual RunOutcome run(const ProgramDescriptor& program, const FlagCombination& flags,
                         int dataset_number, int repeats, const DriverEnv& env,
                         const RunOutputs* reference) = 0;
};

}  // namespace ctune
