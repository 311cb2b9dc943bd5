#include "ctune/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ctune/error.hpp"
#include "ctune/rng.hpp"

namespace ctune {

// ---------------------------------------------------------------------------
// flag space
// ---------------------------------------------------------------------------

void FlagSpace::validate() const {
  std::set<std::string> seen;
  for (const auto& flag : flags) {
    if (flag.name.empty()) raise(errc::bad_value, "flag with empty name");
    if (!seen.insert(flag.name).second) raise(errc::bad_value, "duplicate flag " + flag.name);
  }
}

FlagSpace FlagSpace::parse(const std::string& text) {
  FlagSpace space;
  for (const auto& packet : parse_packet_stream(text)) {
    if (packet.empty()) continue;
    if (const auto* levels = packet.find("BASE_LEVELS")) {
      std::string token;
      for (char c : *levels + std::string(",")) {
        if (c == ',' || c == ' ') {
          if (!token.empty()) space.base_levels.push_back(token);
          token.clear();
        } else {
          token += c;
        }
      }
      continue;
    }
    if (const auto* flag = packet.find("FLAG")) {
      FlagDescriptor descriptor;
      descriptor.name = *flag;
      if (const auto* antonym = packet.find("ANTONYM")) descriptor.antonym = *antonym;
      space.flags.push_back(std::move(descriptor));
    }
  }
  if (space.base_levels.empty()) space.base_levels.push_back("-O3");
  space.validate();
  return space;
}

FlagSpace FlagSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "glob-flags-rnd-uniform" || name == "uniform_random") return Strategy::uniform_random;
  if (name == "glob-flags-rnd-fixed" || name == "fixed_length_random") {
    return Strategy::fixed_length_random;
  }
  if (name == "glob-flags-one-by-one" || name == "one_by_one") return Strategy::one_by_one;
  if (name == "glob-flags-one-off-rnd" || name == "one_off_prune") return Strategy::one_off_prune;
  raise(errc::usage, "unknown strategy: " + name);
}

const char* strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::uniform_random: return "glob-flags-rnd-uniform";
    case Strategy::fixed_length_random: return "glob-flags-rnd-fixed";
    case Strategy::one_by_one: return "glob-flags-one-by-one";
    case Strategy::one_off_prune: return "glob-flags-one-off-rnd";
  }
  return "glob-flags-rnd-uniform";
}

void ExplorationConfig::validate() const {
  if (budget < 1) raise(errc::bad_value, "budget must be >= 1");
  if (per_flag_probability <= 0.0 || per_flag_probability > 1.0) {
    raise(errc::bad_value, "per-flag probability must be in (0, 1]");
  }
  if (repeats < 1) raise(errc::bad_value, "repeats must be >= 1");
  if (dataset < 1) raise(errc::bad_value, "dataset numbers are 1-based");
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

std::vector<FlagCombination> gen_uniform_random(const FlagSpace& space, uint64_t seed,
                                                double probability, size_t count) {
  space.validate();
  if (probability <= 0.0 || probability > 1.0) {
    raise(errc::bad_value, "probability must be in (0, 1]");
  }
  Rng rng(seed);
  std::vector<FlagCombination> combos;
  combos.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    FlagCombination combo;
    combo.base_level = space.base_levels[rng.next_below(space.base_levels.size())];
    for (const auto& flag : space.flags) {
      if (rng.next_bernoulli(probability)) combo.flags.push_back(flag.name);
    }
    combos.push_back(std::move(combo));
  }
  return combos;
}

std::vector<FlagCombination> gen_fixed_length(const FlagSpace& space, uint64_t seed, size_t k,
                                              size_t count) {
  space.validate();
  if (k < 1 || k > space.flags.size()) {
    raise(errc::length_exceeds_space, "k=" + std::to_string(k) + " with " +
                                          std::to_string(space.flags.size()) + " flags");
  }
  Rng rng(seed);
  std::vector<FlagCombination> combos;
  combos.reserve(count);
  std::vector<size_t> indices(space.flags.size());
  for (size_t i = 0; i < count; ++i) {
    FlagCombination combo;
    combo.base_level = space.base_levels[rng.next_below(space.base_levels.size())];
    for (size_t j = 0; j < indices.size(); ++j) indices[j] = j;
    // partial Fisher-Yates, first k slots form a uniform k-subset
    for (size_t j = 0; j < k; ++j) {
      size_t pick = j + rng.next_below(indices.size() - j);
      std::swap(indices[j], indices[pick]);
    }
    std::vector<size_t> chosen(indices.begin(), indices.begin() + static_cast<long>(k));
    std::sort(chosen.begin(), chosen.end());
    for (size_t idx : chosen) combo.flags.push_back(space.flags[idx].name);
    combos.push_back(std::move(combo));
  }
  return combos;
}

std::vector<FlagCombination> gen_one_by_one(const FlagSpace& space) {
  space.validate();
  std::vector<FlagCombination> combos;
  for (const auto& level : space.base_levels) {
    for (const auto& flag : space.flags) {
      FlagCombination combo;
      combo.base_level = level;
      combo.flags.push_back(flag.name);
      combos.push_back(std::move(combo));
    }
  }
  return combos;
}

// ---------------------------------------------------------------------------
// one-off pruning
// ---------------------------------------------------------------------------

FlagCombination one_off_prune(const FlagCombination& base,
                              const std::function<double(const FlagCombination&)>& evaluate,
                              double epsilon, PruneReport* report) {
  PruneReport local;
  PruneReport& out = report ? *report : local;
  out = PruneReport{};

  FlagCombination current = base;
  double best_metric = evaluate(base);
  ++out.evaluations;
  out.base_metric = best_metric;
  out.final_metric = best_metric;

  for (const auto& flag : base.flags) {
    FlagCombination candidate = current;
    candidate.flags.erase(std::find(candidate.flags.begin(), candidate.flags.end(), flag));
    double metric = evaluate(candidate);
    ++out.evaluations;
    const double reference = std::abs(best_metric) > 0 ? std::abs(best_metric) : 1.0;
    if (std::abs(metric - best_metric) < epsilon * reference) {
      current = std::move(candidate);
      best_metric = metric;  // re-baseline on the pruned combination
      out.removed.push_back(flag);
    }
  }
  out.final_metric = best_metric;
  return current;
}

// ---------------------------------------------------------------------------
// exploration loop
// ---------------------------------------------------------------------------

namespace {

struct Evaluator {
  const ProgramDescriptor& program;
  const ExplorationConfig& config;
  ExperimentContext& ctx;
  ExplorationReport& report;
  const RunOutputs* reference;
  std::vector<ExecutionRecord> baseline_execs;
  CompilationRecord baseline_comp;
  std::map<std::string, size_t> seen_combos;  // canonical -> iteration index (1-based)

  // Compiles and runs one combination, recording everything; duplicates and
  // unchanged objects reuse prior executions.
  const IterationResult& evaluate(const FlagCombination& combo) {
    auto seen = seen_combos.find(combo.canonical());
    if (seen != seen_combos.end()) {
      IterationResult repeat = report.iterations[seen->second - 1];
      repeat.cached = true;
      report.iterations.push_back(std::move(repeat));
      ++report.cache_hits;
      return report.iterations.back();
    }

    auto [comp, outcome] = compile_program(ctx, program, combo);
    ++report.compile_count;
    ctx.repo.record(comp);
    if (outcome.features && !outcome.features->empty()) {
      FeatureRecord features;
      features.feature_id = ctx.idgen.next();
      features.compile_id = comp.compile_id;
      features.vector = *outcome.features;
      ctx.repo.record_features(features);
    }

    IterationResult result;
    result.combo = combo;
    result.compile_id = comp.compile_id;

    std::optional<ExecutionRecord> cached =
        skip_if_unchanged(ctx.repo, comp.obj_md5, ctx.ids.program, config.dataset);
    ExecutionRecord exec;
    if (cached) {
      exec = *cached;
      result.cached = true;
      ++report.cache_hits;
    } else {
      auto [fresh, run_outcome] =
          run_program(ctx, program, comp, combo, config.dataset, config.repeats,
                      /*is_baseline=*/false, reference, baseline_execs.front().run_id);
      ctx.repo.record(fresh);
      exec = std::move(fresh);
    }
    result.run_id = exec.run_id;
    result.output_correct = exec.output_correct;
    if (exec.output_correct) {
      // A reused execution may be tied to the baseline of an earlier session;
      // derive against whichever baseline it references.
      const ExecutionRecord* base_exec = &baseline_execs.front();
      const CompilationRecord* base_comp = &baseline_comp;
      if (exec.run_id_associate != base_exec->run_id && !exec.is_baseline()) {
        base_exec = ctx.repo.find_execution(exec.run_id_associate);
        base_comp = base_exec ? ctx.repo.find_compilation(base_exec->compile_id) : nullptr;
      }
      if (exec.is_baseline()) {
        base_exec = &exec;
        base_comp = ctx.repo.find_compilation(exec.compile_id);
      }
      if (base_exec && base_comp) {
        OptimizationCase opt_case =
            derive_case(comp, {exec}, {*base_exec}, *base_comp, ctx.env.aggregator);
        result.speedup = opt_case.speedup;
        result.size_ratio = opt_case.size_ratio;
      }
    }

    seen_combos[combo.canonical()] = report.iterations.size() + 1;
    report.iterations.push_back(std::move(result));
    return report.iterations.back();
  }
};

}  // namespace

ExplorationReport explore(const ProgramDescriptor& program, const FlagSpace& space,
                          const ExplorationConfig& config, ExperimentContext& ctx) {
  config.validate();
  space.validate();

  ExplorationReport report;

  // baseline reference compile + run at the configured level
  FlagCombination baseline_flags;
  baseline_flags.base_level = config.reference_level;
  CompilationRecord baseline_comp;
  RunOutputs reference;
  std::vector<ExecutionRecord> baseline_execs;
  try {
    auto [comp, comp_outcome] = compile_program(ctx, program, baseline_flags);
    ++report.compile_count;
    ctx.repo.record(comp);
    if (comp_outcome.features && !comp_outcome.features->empty()) {
      FeatureRecord features;
      features.feature_id = ctx.idgen.next();
      features.compile_id = comp.compile_id;
      features.vector = *comp_outcome.features;
      ctx.repo.record_features(features);
    }
    auto [exec, run_outcome] = run_program(ctx, program, comp, baseline_flags, config.dataset,
                                           config.repeats, /*is_baseline=*/true, nullptr);
    ctx.repo.record(exec);
    baseline_comp = std::move(comp);
    reference = run_outcome.outputs;
    baseline_execs.push_back(std::move(exec));
  } catch (const Error& err) {
    raise(errc::baseline_failed, std::string("baseline evaluation failed: ") + err.what());
  }
  report.baseline_compile_id = baseline_comp.compile_id;
  report.baseline_run_id = baseline_execs.front().run_id;
  report.baseline_time = baseline_execs.front().run_time;

  Evaluator evaluator{program, config, ctx, report, &reference,
                      std::move(baseline_execs), baseline_comp, {}};

  switch (config.strategy) {
    case Strategy::uniform_random: {
      for (const auto& combo :
           gen_uniform_random(space, config.seed, config.per_flag_probability, config.budget)) {
        evaluator.evaluate(combo);
      }
      break;
    }
    case Strategy::fixed_length_random: {
      for (const auto& combo :
           gen_fixed_length(space, config.seed, config.fixed_length, config.budget)) {
        evaluator.evaluate(combo);
      }
      break;
    }
    case Strategy::one_by_one: {
      std::vector<FlagCombination> combos = gen_one_by_one(space);
      if (combos.size() > config.budget) combos.resize(config.budget);
      for (const auto& combo : combos) evaluator.evaluate(combo);
      break;
    }
    case Strategy::one_off_prune: {
      FlagCombination all;
      all.base_level = config.reference_level;
      for (const auto& flag : space.flags) all.flags.push_back(flag.name);
      size_t budget_left = config.budget;
      auto metric = [&](const FlagCombination& combo) -> double {
        if (budget_left == 0) raise(errc::evaluation_failed, "exploration budget exhausted");
        --budget_left;
        const IterationResult& result = evaluator.evaluate(combo);
        if (!result.output_correct) {
          raise(errc::evaluation_failed, "combination miscompiles: " + combo.canonical());
        }
        return result.speedup;
      };
      try {
        one_off_prune(all, metric, config.prune_epsilon);
      } catch (const Error& err) {
        if (err.code() != errc::evaluation_failed) throw;
        // budget ran out mid-prune: the iterations so far stand
      }
      break;
    }
  }

  // best correct case and the 95% first-hit index
  for (size_t i = 0; i < report.iterations.size(); ++i) {
    const IterationResult& result = report.iterations[i];
    if (!result.output_correct) continue;
    if (result.speedup > report.best_speedup) {
      report.best_speedup = result.speedup;
      report.best_index = i + 1;
    }
  }
  if (report.best_index != 0) {
    const double threshold = 0.95 * report.best_speedup;
    for (size_t i = 0; i < report.iterations.size(); ++i) {
      const IterationResult& result = report.iterations[i];
      if (result.output_correct && result.speedup >= threshold) {
        report.iterations_to_95pct = i + 1;
        break;
      }
    }
  }
  return report;
}

std::vector<Packet> ExplorationReport::to_packets() const {
  std::vector<Packet> packets;
  Packet head;
  head.add("BASELINE_COMPILE_ID", baseline_compile_id.str());
  head.add("BASELINE_RUN_ID", baseline_run_id.str());
  head.add("BASELINE_TIME", format_float(baseline_time));
  head.add("ITERATIONS", std::to_string(iterations.size()));
  head.add("BEST_ITERATION", std::to_string(best_index));
  head.add("BEST_SPEEDUP", format_float(best_speedup));
  head.add("ITERATIONS_TO_95PCT", std::to_string(iterations_to_95pct));
  head.add("COMPILE_COUNT", std::to_string(compile_count));
  head.add("CACHE_HITS", std::to_string(cache_hits));
  if (const IterationResult* best = best_case()) {
    head.add("BEST_OPT_FLAGS", best->combo.canonical());
  }
  packets.push_back(std::move(head));
  for (size_t i = 0; i < iterations.size(); ++i) {
    const IterationResult& result = iterations[i];
    Packet packet;
    packet.add("ITERATION", std::to_string(i + 1));
    packet.add("OPT_FLAGS", result.combo.canonical());
    packet.add("COMPILE_ID", result.compile_id.str());
    packet.add("RUN_ID", result.run_id.str());
    packet.add("SPEEDUP", format_float(result.speedup));
    packet.add("SIZE_RATIO", format_float(result.size_ratio));
    packet.add("CACHED", result.cached ? "1" : "0");
    packet.add("OUTPUT_CORRECT", result.output_correct ? "1" : "0");
    packets.push_back(std::move(packet));
  }
  return packets;
}

}  // namespace ctune
