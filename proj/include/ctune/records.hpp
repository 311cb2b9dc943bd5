#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctune/ids.hpp"
#include "ctune/packet.hpp"

namespace ctune {

// ---------------------------------------------------------------------------
// flag combinations
// ---------------------------------------------------------------------------

// A base optimization level plus individual flags; one point in the search
// space. Auxiliary platform flags (e.g. -msse2, -march=...) ride along but are
// tracked separately so they stay out of the searched space.
struct FlagCombination {
  std::string base_level;                   // "-O3", "-Os", compiler-specific, or empty
  std::vector<std::string> flags;           // ordered, no duplicates
  std::vector<std::string> platform_flags;  // disjoint from flags

  // "<base_level> <flag> <flag>..."
  std::string canonical() const;
  std::string platform_canonical() const;

  bool contains(const std::string& flag) const;
  void validate() const;

  static FlagCombination parse(const std::string& opt_flags,
                               const std::string& opt_flags_platform = "");

  friend bool operator==(const FlagCombination& a, const FlagCombination& b) {
    return a.base_level == b.base_level && a.flags == b.flags &&
           a.platform_flags == b.platform_flags;
  }
};

// ---------------------------------------------------------------------------
// entity descriptors
// ---------------------------------------------------------------------------

struct PlatformDescriptor {
  EntityId id;
  std::string name;
  std::string notes;
};

struct CompilerDescriptor {
  EntityId id;
  std::string name;                 // descriptive, e.g. "milepostgcc44"
  std::string invocation_template;  // must mention {SOURCES}, {OUTPUT}, {FLAGS}
  std::string flag_space_ref;
};

struct DatasetEntry {
  int number = 0;  // 1-based, contiguous
  std::string command_line;
  long loop_wrapper_bound = 1;
};

struct ProgramDescriptor {
  EntityId id;
  std::string name;
  std::string source_dir;
  std::vector<DatasetEntry> datasets;

  int dataset_count() const { return static_cast<int>(datasets.size()); }
  const DatasetEntry& dataset(int number) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// feature vectors
// ---------------------------------------------------------------------------

enum class FeatureKind { static_features, dynamic_features };

struct FeatureVector {
  FeatureKind kind = FeatureKind::static_features;
  std::vector<std::pair<std::string, double>> entries;  // index name -> value
  std::string anchor_pass;  // pass after which static features were extracted

  bool empty() const { return entries.empty(); }
  const double* find(const std::string& index) const;
  void set(const std::string& index, double value);

  // "ft1=9.000000, ft2=4.000000"
  std::string serialize_entries() const;
  static std::vector<std::pair<std::string, double>> parse_entries(const std::string& text);
};

// A feature vector attached to a compilation, as carried by _prog_feat packets.
struct FeatureRecord {
  EntityId feature_id;
  EntityId compile_id;
  std::string function_name;
  FeatureVector vector;

  Packet to_packet() const;
  static FeatureRecord from_packet(const Packet& packet);
};

// ---------------------------------------------------------------------------
// compilation / execution records
// ---------------------------------------------------------------------------

struct CompilationRecord {
  EntityId compile_id;
  EntityId platform_id;
  EntityId environment_id;
  EntityId compiler_id;
  EntityId program_id;
  FlagCombination opt;
  double compile_time = 0.0;
  uint64_t bin_size = 0;      // 0 permitted only on compile failure
  std::string obj_md5;        // 32 lowercase hex chars, empty on failure
  std::string date;           // "2009-06-04"
  std::string time;           // "14:06:47"
  std::string notes;
  std::vector<std::pair<std::string, std::string>> extensions;

  void validate() const;
  Packet to_packet() const;
  static CompilationRecord from_packet(const Packet& packet);
};

struct ProfileEntry {
  double seconds = 0.0;
  long long calls = 0;
  double fraction = 0.0;

  friend bool operator==(const ProfileEntry&, const ProfileEntry&) = default;
};

struct ExecutionRecord {
  EntityId run_id;
  EntityId run_id_associate;  // == run_id marks the baseline reference run
  EntityId compile_id;
  EntityId compiler_id;
  EntityId program_id;
  EntityId platform_id;
  EntityId environment_id;
  int dataset_number = 1;
  uint64_t bin_size = 0;
  bool output_correct = true;
  double run_time = 0.0;
  double run_time_user = 0.0;
  double run_time_sys = 0.0;
  std::string run_command_line;
  std::vector<std::pair<std::string, ProfileEntry>> profile;
  std::vector<std::pair<std::string, long long>> hardware_counters;
  int processor_num = 0;
  int rank = 0;
  std::string notes;
  std::vector<std::pair<std::string, std::string>> extensions;

  bool is_baseline() const { return run_id == run_id_associate; }
  // Per-repeat wall times (RUN_TIME1..N extensions), falling back to run_time.
  std::vector<double> repeat_times() const;

  void validate() const;
  Packet to_packet() const;
  static ExecutionRecord from_packet(const Packet& packet);
};

// ---------------------------------------------------------------------------
// optimization cases
// ---------------------------------------------------------------------------

enum class Aggregator { min_time, median, mean };

Aggregator aggregator_from_name(const std::string& name);
const char* aggregator_name(Aggregator agg);
double aggregate_times(const std::vector<double>& times, Aggregator agg);

// A compilation joined with its executions plus improvement metrics over the
// baseline; the unit of sharing.
struct OptimizationCase {
  CompilationRecord compilation;
  std::vector<ExecutionRecord> executions;
  EntityId baseline_compile_id;
  EntityId baseline_run_id;
  double speedup = 1.0;
  double size_ratio = 1.0;
  double compile_time_ratio = 1.0;
  int rank = 0;

  bool output_correct() const;
  std::vector<double> all_times() const;
  double dispersion() const;  // (max-min)/median over collected times

  Packet summary_packet() const;
};

// Metrics for a candidate (compilation, executions) against a baseline pair.
// Every execution must match the baseline's dataset and reference its run id.
OptimizationCase derive_case(const CompilationRecord& compilation,
                             const std::vector<ExecutionRecord>& executions,
                             const std::vector<ExecutionRecord>& baseline_executions,
                             const CompilationRecord& baseline_compilation,
                             Aggregator agg = Aggregator::median);

}  // namespace ctune
