#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctune/records.hpp"
#include "ctune/repository.hpp"

namespace ctune {

struct Clone {
  int clone_id = 0;  // clone 0 is the original
  FlagCombination flags;
  std::map<int, double> phase_times;  // phase id -> seconds per invocation

  double mean_time() const;
};

struct AdaptiveProgram {
  EntityId program_id;
  std::vector<Clone> clones;
  double monitor_overhead = 0.002;  // fraction added per monitored invocation

  void validate() const;
  std::vector<Packet> to_packets() const;
  static AdaptiveProgram from_packets(const std::vector<Packet>& packets);
  static AdaptiveProgram load(const std::filesystem::path& path);
};

struct TraceStep {
  int phase_id = 0;
  FeatureVector features;  // dynamic, hardware-counter style
};

// Seeded phase model: deterministic segment sequence with per-phase feature
// distributions (mean vector plus relative gaussian jitter).
struct TraceSpec {
  uint64_t seed = 1;
  std::vector<std::pair<int, long>> segments;  // (phase id, steps)
  std::map<int, FeatureVector> phase_features;
  std::map<int, double> phase_sigma;

  static TraceSpec from_packets(const std::vector<Packet>& packets);
  static TraceSpec load(const std::filesystem::path& path);
};

struct PhaseTrace {
  std::vector<TraceStep> steps;

  static PhaseTrace generate(const TraceSpec& spec);
};

struct AdaptationPolicy {
  int bins = 8;                       // equal-width quantization per index
  long recalibration_interval = 1000; // per-signature hits; 0 disables
};

// Quantizes dynamic feature vectors into table signatures; the bin edges come
// from the observed per-index range.
class FeatureQuantizer {
 public:
  FeatureQuantizer(const PhaseTrace& trace, int bins);
  std::string signature(const FeatureVector& features) const;

 private:
  int bins_;
  std::map<std::string, std::pair<double, double>> ranges_;  // index -> (min, max)
};

struct StepOutcome {
  int phase_id = 0;
  std::string signature;
  int clone_id = 0;
  double time = 0.0;
  bool calibration = false;  // sampling an untried clone for the table
};

struct TableRow {
  std::string signature;
  int best_clone = 0;
  long evidence = 0;
};

struct SimReport {
  double total_time = 0.0;
  double oracle_time = 0.0;  // per-step best clone, no monitoring overhead
  double regret = 0.0;       // total_time / oracle_time - 1
  std::vector<StepOutcome> steps;
  std::vector<TableRow> table;

  std::vector<Packet> to_packets() const;
  std::string to_csv() const;
};

// Discrete-event simulation: per step, a confident table row selects its
// clone; otherwise the next untried clone is sampled round-robin and the
// table is updated with the argmin-time clone so far.
SimReport simulate(const AdaptiveProgram& program, const PhaseTrace& trace,
                   const AdaptationPolicy& policy);

// Replaces the k worst clones (by mean phase time) with the best unused flag
// combinations from the repository's Pareto frontier for this program; the
// original clone 0 is never removed.
AdaptiveProgram evolve_clones(const AdaptiveProgram& program, const Repository& repo, size_t k);

}  // namespace ctune
