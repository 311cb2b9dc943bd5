#include "ctune/filters.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "ctune/error.hpp"

namespace ctune {

NoiseAssessment assess_noise(const std::vector<double>& run_times, Aggregator agg, double gate) {
  if (run_times.empty()) raise(errc::empty_input, "no run times");
  NoiseAssessment result;
  result.aggregate = aggregate_times(run_times, agg);
  const double lo = *std::min_element(run_times.begin(), run_times.end());
  const double hi = *std::max_element(run_times.begin(), run_times.end());
  const double mid = aggregate_times(run_times, Aggregator::median);
  if (mid == 0.0) {
    result.dispersion = hi == lo ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    result.dispersion = (hi - lo) / mid;
  }
  result.stable = result.dispersion <= gate;
  return result;
}

std::vector<OptimizationCase> best_time_filter(const std::vector<OptimizationCase>& cases,
                                               double min_speedup, double noise_gate) {
  std::vector<OptimizationCase> kept;
  for (const auto& opt_case : cases) {
    if (!opt_case.output_correct()) continue;
    if (opt_case.dispersion() > noise_gate) continue;
    if (opt_case.speedup < min_speedup) continue;
    kept.push_back(opt_case);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const OptimizationCase& a, const OptimizationCase& b) {
                     return a.speedup > b.speedup;
                   });
  return kept;
}

std::vector<size_t> pareto_indices(const std::vector<std::vector<double>>& points) {
  const size_t n = points.size();
  std::vector<size_t> kept;
  for (size_t i = 0; i < n; ++i) {
    bool excluded = false;
    for (size_t j = 0; j < n && !excluded; ++j) {
      if (i == j) continue;
      bool ge_all = true;
      bool gt_any = false;
      bool equal_all = true;
      for (size_t d = 0; d < points[i].size(); ++d) {
        if (points[j][d] < points[i][d]) ge_all = false;
        if (points[j][d] > points[i][d]) gt_any = true;
        if (points[j][d] != points[i][d]) equal_all = false;
      }
      if (ge_all && gt_any) excluded = true;                // dominated
      else if (equal_all && j < i) excluded = true;          // tie: earlier wins
    }
    if (!excluded) kept.push_back(i);
  }
  return kept;
}

namespace {

// 2-D frontier by sorted sweep: order by speedup desc, size desc, recording
// order asc; a point survives iff its size strictly beats everything already
// seen. Full ties collapse onto the earliest-recorded point.
std::vector<size_t> pareto_indices_2d(const std::vector<std::pair<double, double>>& points) {
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&points](size_t a, size_t b) {
    if (points[a].first != points[b].first) return points[a].first > points[b].first;
    if (points[a].second != points[b].second) return points[a].second > points[b].second;
    return a < b;
  });
  std::vector<size_t> kept;
  double best_size = -std::numeric_limits<double>::infinity();
  for (size_t idx : order) {
    if (points[idx].second > best_size) {
      kept.push_back(idx);
      best_size = points[idx].second;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

std::vector<OptimizationCase> pareto_filter(const std::vector<OptimizationCase>& cases,
                                            bool with_compile_time) {
  std::vector<size_t> frontier;
  if (with_compile_time) {
    std::vector<std::vector<double>> points;
    points.reserve(cases.size());
    for (const auto& opt_case : cases) {
      points.push_back({opt_case.speedup, opt_case.size_ratio, opt_case.compile_time_ratio});
    }
    frontier = pareto_indices(points);
  } else {
    std::vector<std::pair<double, double>> points;
    points.reserve(cases.size());
    for (const auto& opt_case : cases) {
      points.emplace_back(opt_case.speedup, opt_case.size_ratio);
    }
    frontier = pareto_indices_2d(points);
  }
  std::vector<OptimizationCase> kept;
  kept.reserve(frontier.size());
  for (size_t idx : frontier) kept.push_back(cases[idx]);
  return kept;
}

void rank_case(Repository& repo, const EntityId& run_id, int rank) {
  repo.set_rank(run_id, rank);
}

}  // namespace ctune
