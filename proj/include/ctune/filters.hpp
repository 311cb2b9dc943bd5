#pragma once

#include <string>
#include <vector>

#include "ctune/records.hpp"
#include "ctune/repository.hpp"

namespace ctune {

struct MetricPoint {
  EntityId case_ref;
  double speedup = 1.0;
  double size_ratio = 1.0;
  double compile_time_ratio = 1.0;
  double dispersion = 0.0;
};

struct NoiseAssessment {
  double aggregate = 0.0;
  double dispersion = 0.0;  // (max - min) / median
  bool stable = false;
};

inline constexpr double kDefaultNoiseGate = 0.05;

NoiseAssessment assess_noise(const std::vector<double>& run_times,
                             Aggregator agg = Aggregator::median,
                             double gate = kDefaultNoiseGate);

// get-all-best-flags-time: correct, stable, speedup >= min_speedup, sorted
// descending by speedup.
std::vector<OptimizationCase> best_time_filter(const std::vector<OptimizationCase>& cases,
                                               double min_speedup,
                                               double noise_gate = kDefaultNoiseGate);

// get-all-best-flags-time-size-pareto: weak dominance on (speedup,
// size_ratio), both-axis ties keep the earlier-recorded case. The optional
// third objective adds compile_time_ratio to the dominance test.
std::vector<OptimizationCase> pareto_filter(const std::vector<OptimizationCase>& cases,
                                            bool with_compile_time = false);

// Frontier computation over bare points; returns indices into the input in
// input order.
std::vector<size_t> pareto_indices(const std::vector<std::vector<double>>& points);

void rank_case(Repository& repo, const EntityId& run_id, int rank);

}  // namespace ctune
