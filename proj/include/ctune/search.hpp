#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ctune/driver.hpp"
#include "ctune/records.hpp"

namespace ctune {

struct FlagDescriptor {
  std::string name;
  std::string antonym;  // e.g. "-fno-unroll-loops"
};

struct FlagSpace {
  std::vector<std::string> base_levels;
  std::vector<FlagDescriptor> flags;

  void validate() const;
  static FlagSpace parse(const std::string& text);
  static FlagSpace load(const std::filesystem::path& path);
};

enum class Strategy { uniform_random, fixed_length_random, one_by_one, one_off_prune };

// CLI names follow the CCC plugin vocabulary.
Strategy strategy_from_name(const std::string& name);
const char* strategy_name(Strategy strategy);

struct ExplorationConfig {
  Strategy strategy = Strategy::uniform_random;
  uint32_t budget = 1;
  uint64_t seed = 1;
  double per_flag_probability = 0.5;
  uint32_t fixed_length = 1;
  int repeats = 1;
  int dataset = 1;
  std::string reference_level = "-O3";
  double prune_epsilon = 0.02;

  void validate() const;
};

// One independent Bernoulli(probability) draw per flag; base level uniform.
std::vector<FlagCombination> gen_uniform_random(const FlagSpace& space, uint64_t seed,
                                                double probability, size_t count);

// Uniform random k-subsets, kept in space order.
std::vector<FlagCombination> gen_fixed_length(const FlagSpace& space, uint64_t seed, size_t k,
                                              size_t count);

// Every flag alone, for every base level; |flags| x |base_levels| combinations.
std::vector<FlagCombination> gen_one_by_one(const FlagSpace& space);

struct PruneReport {
  size_t evaluations = 0;
  double base_metric = 0.0;
  double final_metric = 0.0;
  std::vector<std::string> removed;
};

// Walks the flags of `base` in order and permanently removes each one whose
// removal moves the metric by less than epsilon (relative to the current
// best); at most |flags|+1 evaluations.
FlagCombination one_off_prune(const FlagCombination& base,
                              const std::function<double(const FlagCombination&)>& evaluate,
                              double epsilon, PruneReport* report = nullptr);

struct IterationResult {
  FlagCombination combo;
  EntityId compile_id;
  EntityId run_id;
  double speedup = 0.0;
  double size_ratio = 0.0;
  bool cached = false;
  bool output_correct = true;
};

struct ExplorationReport {
  EntityId baseline_compile_id;
  EntityId baseline_run_id;
  double baseline_time = 0.0;
  std::vector<IterationResult> iterations;
  size_t best_index = 0;        // 0 = none found
  double best_speedup = 0.0;
  size_t iterations_to_95pct = 0;
  size_t compile_count = 0;     // never exceeds budget + 1
  size_t cache_hits = 0;

  const IterationResult* best_case() const {
    return best_index == 0 ? nullptr : &iterations[best_index - 1];
  }
  std::vector<Packet> to_packets() const;
};

// Baseline compile+run at the reference level, then up to `budget` candidate
// evaluations, everything recorded in the repository with the baseline as
// RUN_ID_ASSOCIATE. Duplicate combinations and unchanged-object compilations
// reuse prior executions.
ExplorationReport explore(const ProgramDescriptor& program, const FlagSpace& space,
                          const ExplorationConfig& config, ExperimentContext& ctx);

}  // namespace ctune
