// Acceptance suite: one pass/fail line per criterion, exit 0 only when every
// criterion holds. Each criterion pins its tolerance in code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "ctune/driver.hpp"
#include "ctune/error.hpp"
#include "ctune/filters.hpp"
#include "ctune/predictor.hpp"
#include "ctune/records.hpp"
#include "ctune/repository.hpp"
#include "ctune/rng.hpp"
#include "ctune/search.hpp"
#include "ctune/service.hpp"
#include "ctune/synthetic.hpp"
#include "ctune/unidapt.hpp"

using namespace ctune;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const char* description, bool ok, const std::string& detail = "") {
  std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", number, description,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ctune_accept_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

CompilationRecord random_compilation(Rng& rng) {
  CompilationRecord record;
  record.compile_id = EntityId(rng.next_u64() | 1);
  record.platform_id = EntityId(rng.next_u64() | 1);
  record.environment_id = EntityId(rng.next_u64() | 1);
  record.compiler_id = EntityId(rng.next_u64() | 1);
  record.program_id = EntityId(rng.next_u64() | 1);
  record.opt.base_level = "-O" + std::to_string(rng.next_below(4));
  const char* pool[] = {"-funroll-loops", "-fpeephole2", "-ftracer", "-fno-tree-dce",
                        "-finline-functions", "-fschedule-insns"};
  for (const char* flag : pool) {
    if (rng.next_bernoulli(0.5)) record.opt.flags.push_back(flag);
  }
  if (rng.next_bernoulli(0.4)) record.opt.platform_flags.push_back("-msse2");
  record.compile_time = rng.next_unit() * 100.0;
  record.bin_size = rng.next_below(1 << 20) + 1;
  record.obj_md5 = "b15359251b3c185dfa180e0e1ad16228";
  record.date = "2009-06-04";
  record.time = "14:06:47";
  if (rng.next_bernoulli(0.5)) record.notes = "baseline compilation";
  if (rng.next_bernoulli(0.5)) record.extensions.emplace_back("ICI_PASSES_USE", "1");
  if (rng.next_bernoulli(0.3)) record.extensions.emplace_back("OPT_PAR_STATIC", "");
  return record;
}

ExecutionRecord random_execution(Rng& rng) {
  ExecutionRecord record;
  record.run_id = EntityId(rng.next_u64() | 1);
  record.run_id_associate = rng.next_bernoulli(0.3) ? record.run_id : EntityId(rng.next_u64() | 1);
  record.compile_id = EntityId(rng.next_u64() | 1);
  record.compiler_id = EntityId(rng.next_u64() | 1);
  record.program_id = EntityId(rng.next_u64() | 1);
  record.platform_id = EntityId(rng.next_u64() | 1);
  record.environment_id = EntityId(rng.next_u64() | 1);
  record.dataset_number = static_cast<int>(rng.next_below(20)) + 1;
  record.bin_size = rng.next_below(1 << 20) + 1;
  record.output_correct = rng.next_bernoulli(0.9);
  record.run_time = rng.next_unit() * 20.0;
  record.run_time_user = record.run_time * 0.85;
  record.run_time_sys = record.run_time * 0.05;
  record.run_command_line = "../../data/1.pgm output.pgm -c > ftmp_out";
  if (rng.next_bernoulli(0.4)) {
    record.profile.emplace_back("hot_loop", ProfileEntry{12.27, 782, 0.0156905371});
  }
  if (rng.next_bernoulli(0.4)) record.hardware_counters.emplace_back("PAPI_TOT_INS", 123456);
  record.processor_num = static_cast<int>(rng.next_below(4));
  record.rank = static_cast<int>(rng.next_below(10));
  if (rng.next_bernoulli(0.4)) record.extensions.emplace_back("RUN_TIME1", "0.000000");
  if (rng.next_bernoulli(0.3)) record.extensions.emplace_back("RUN_POWER", "");
  record.notes = "test optimizations";
  return record;
}

struct Workbench {
  TempDir dir;
  std::vector<SyntheticProgram> programs;
  SyntheticBackend backend;
  Repository repo;
  ExperimentContext ctx;

  Workbench(std::vector<SyntheticProgram> progs, uint64_t id_seed,
            const Repository::CreateOptions& options = Repository::CreateOptions())
      : programs(std::move(progs)),
        backend(programs),
        repo(Repository::create(dir.path / "db", options)),
        ctx{backend, repo, {}, DriverEnv{}, IdGenerator(id_seed)} {
    ctx.env.date = "2009-06-04";
    ctx.env.time = "14:06:47";
  }

  ExperimentIds ids_for(const SyntheticProgram& program) {
    return register_experiment_entities(
        repo, {EntityId{}, "bench-platform", ""}, {EntityId{}, "bench-environment", ""},
        CompilerDescriptor{EntityId{}, "synthetic", "s {SOURCES} {OUTPUT} {FLAGS}", ""},
        program.descriptor(), ctx.idgen);
  }

  // baseline plus every subset of the program's own effect flags
  void evaluate_exhaustively(const SyntheticProgram& program) {
    ctx.ids = ids_for(program);
    std::vector<std::string> flags;
    for (const auto& [flag, effect] : program.flag_effects) flags.push_back(flag);

    auto [base_comp, base_out] = compile_program(ctx, program.descriptor(), FlagCombination{"-O3"});
    repo.record(base_comp);
    FeatureRecord features;
    features.feature_id = ctx.idgen.next();
    features.compile_id = base_comp.compile_id;
    features.vector = program.features;
    repo.record_features(features);
    auto [base_exec, base_run] = run_program(ctx, program.descriptor(), base_comp,
                                             FlagCombination{"-O3"}, 1, 1, true, nullptr);
    repo.record(base_exec);

    for (size_t mask = 1; mask < (size_t{1} << flags.size()); ++mask) {
      FlagCombination combo;
      combo.base_level = "-O3";
      for (size_t i = 0; i < flags.size(); ++i) {
        if (mask & (size_t{1} << i)) combo.flags.push_back(flags[i]);
      }
      auto [comp, comp_out] = compile_program(ctx, program.descriptor(), combo);
      repo.record(comp);
      auto [exec, run_out] = run_program(ctx, program.descriptor(), comp, combo, 1, 1, false,
                                         &base_run.outputs, base_exec.run_id);
      repo.record(exec);
    }
  }
};

// surrogate family for the exploration criteria: a few strong flags, the
// rest within a +-0.7% band, plus one interaction
SyntheticProgram exploration_program(uint64_t seed) {
  Rng rng(seed);
  SyntheticProgram program;
  program.id = EntityId(rng.next_u64() | 1);
  program.name = "explore_" + std::to_string(seed);
  program.base_time = 10.0;
  program.base_size = 48870;
  for (int i = 0; i < 10; ++i) {
    const std::string flag = "-f" + std::to_string(i);
    if (i < 3) {
      program.flag_effects[flag] = {0.72 + rng.next_unit() * 0.18, 0.85 + rng.next_unit() * 0.3};
    } else {
      program.flag_effects[flag] = {0.993 + rng.next_unit() * 0.014, 1.0};
    }
  }
  program.interactions.push_back({{"-f0", "-f2"}, 0.9 + rng.next_unit() * 0.08});
  return program;
}

double exhaustive_best(const SyntheticProgram& program, const FlagSpace& space) {
  FlagCombination baseline{"-O3"};
  const double base_time = program.time_for(baseline, 1);
  double best = 0.0;
  for (size_t mask = 0; mask < (size_t{1} << space.flags.size()); ++mask) {
    FlagCombination combo;
    combo.base_level = "-O3";
    for (size_t i = 0; i < space.flags.size(); ++i) {
      if (mask & (size_t{1} << i)) combo.flags.push_back(space.flags[i].name);
    }
    best = std::max(best, base_time / program.time_for(combo, 1));
  }
  return best;
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

void criterion_1_packet_round_trip() {
  bool ok = true;
  std::string detail;
  Rng rng(20090614);
  for (int i = 0; i < 500 && ok; ++i) {
    CompilationRecord comp = random_compilation(rng);
    const std::string once = comp.to_packet().serialize();
    const std::string twice =
        CompilationRecord::from_packet(parse_packet_fields(once)).to_packet().serialize();
    if (once != twice) {
      ok = false;
      detail = "compilation record round-trip diverged";
    }
    ExecutionRecord exec = random_execution(rng);
    const std::string once_run = exec.to_packet().serialize();
    const std::string twice_run =
        ExecutionRecord::from_packet(parse_packet_fields(once_run)).to_packet().serialize();
    if (once_run != twice_run) {
      ok = false;
      detail = "execution record round-trip diverged";
    }
  }
  // the documented field lines parse to the stated values
  CompilationRecord comp = CompilationRecord::from_packet(
      parse_packet_fields("COMPILE_ID=1\nCOMPILE_TIME=69.000000\nBIN_SIZE=48870\n"
                          "OBJ_MD5CRC=b15359251b3c185dfa180e0e1ad16228\nOPT_FLAGS=-O3\n"));
  if (comp.compile_time != 69.0 || comp.bin_size != 48870) {
    ok = false;
    detail = "verbatim compilation lines misparsed";
  }
  ExecutionRecord exec = ExecutionRecord::from_packet(
      parse_packet_fields("RUN_ID=2\nRUN_ID_ASSOCIATE=2\nCOMPILE_ID=1\n"
                          "RUN_TIME=16.355512\nRUN_TIME_USER=13.822898\nRUN_TIME_SYS=2.532614\n"
                          "OUTPUT_CORRECT=1\n"));
  if (exec.run_time != 16.355512 || !exec.output_correct) {
    ok = false;
    detail = "verbatim execution lines misparsed";
  }
  criterion(1, "packet round-trip is bit-exact over 1000 randomized records", ok, detail);
}

void criterion_2_pareto_oracle() {
  bool ok = true;
  std::string detail;
  Rng rng(777);
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const size_t n = 1 + rng.next_below(1000);
    std::vector<OptimizationCase> cases;
    std::vector<std::pair<double, double>> points;
    for (size_t i = 0; i < n; ++i) {
      OptimizationCase opt_case;
      opt_case.compilation.compile_id = EntityId(i + 1);
      // coarse grid provokes ties and duplicates
      opt_case.speedup = 0.5 + 0.05 * static_cast<double>(rng.next_below(40));
      opt_case.size_ratio = 0.5 + 0.05 * static_cast<double>(rng.next_below(40));
      points.emplace_back(opt_case.speedup, opt_case.size_ratio);
      ExecutionRecord exec;
      exec.run_id = EntityId(i + 1);
      exec.run_time = 1.0;
      opt_case.executions.push_back(std::move(exec));
      cases.push_back(std::move(opt_case));
    }
    // brute-force O(n^2) dominance with the earliest-tie rule
    std::vector<size_t> expected;
    for (size_t i = 0; i < n; ++i) {
      bool excluded = false;
      for (size_t j = 0; j < n && !excluded; ++j) {
        if (i == j) continue;
        const bool ge1 = points[j].first >= points[i].first;
        const bool ge2 = points[j].second >= points[i].second;
        const bool strict =
            points[j].first > points[i].first || points[j].second > points[i].second;
        if (ge1 && ge2 && strict) excluded = true;
        if (points[j] == points[i] && j < i) excluded = true;
      }
      if (!excluded) expected.push_back(i);
    }
    std::vector<OptimizationCase> got = pareto_filter(cases);
    if (got.size() != expected.size()) {
      ok = false;
    } else {
      for (size_t i = 0; i < expected.size(); ++i) {
        if (!(got[i].compilation.compile_id == cases[expected[i]].compilation.compile_id)) {
          ok = false;
        }
      }
    }
    if (!ok) detail = "set mismatch at trial " + std::to_string(trial);
  }
  criterion(2, "pareto filter equals brute-force dominance on 200 random sets", ok, detail);
}

void criterion_3_pruning_minimality() {
  bool ok = true;
  std::string detail;
  Rng rng(4242);
  const double epsilon = 0.02;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const size_t n = 4 + rng.next_below(7);  // up to 10 flags
    SyntheticProgram program;
    program.id = EntityId(trial + 1);
    program.name = "prune";
    program.base_time = 10.0;
    program.base_size = 1000;
    std::vector<std::string> flags;
    std::set<std::string> influential;
    for (size_t i = 0; i < n; ++i) {
      const std::string flag = "-f" + std::to_string(i);
      flags.push_back(flag);
      if (rng.next_bernoulli(0.5)) {
        // every influential factor sits at least 7% below 1, so no pair can
        // cancel back to within the epsilon band
        program.flag_effects[flag] = {0.7 + rng.next_unit() * 0.23, 1.0};
        influential.insert(flag);
      } else {
        program.flag_effects[flag] = {1.0, 1.0};  // exactly no effect
      }
    }

    FlagCombination base;
    base.base_level = "-O3";
    base.flags = flags;
    auto metric = [&program](const FlagCombination& combo) {
      return program.base_time / program.time_for(combo, 1);  // speedup vs bare -O3
    };

    // brute force: the unique minimal subset within epsilon of the base metric
    const double base_metric = metric(base);
    std::set<std::string> minimal;
    bool found = false;
    for (size_t size = 0; size <= n && !found; ++size) {
      for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
        FlagCombination combo;
        combo.base_level = "-O3";
        for (size_t i = 0; i < n; ++i) {
          if (mask & (size_t{1} << i)) combo.flags.push_back(flags[i]);
        }
        if (combo.flags.size() != size) continue;
        if (std::abs(metric(combo) - base_metric) < epsilon * base_metric) {
          minimal.insert(combo.flags.begin(), combo.flags.end());
          found = true;
          break;
        }
      }
    }
    if (!found || minimal != influential) {
      ok = false;
      detail = "oracle disagrees with the influential set at trial " + std::to_string(trial);
      break;
    }

    FlagCombination pruned = one_off_prune(base, metric, epsilon);
    std::set<std::string> got(pruned.flags.begin(), pruned.flags.end());
    if (got != minimal) {
      ok = false;
      detail = "prune result differs from the minimal set at trial " + std::to_string(trial);
    }
  }
  criterion(3, "one-off pruning recovers the brute-force minimal influential set", ok, detail);
}

void criterion_4_exploration_convergence() {
  bool ok = true;
  std::string detail;
  FlagSpace space;
  space.base_levels = {"-O3"};
  for (int i = 0; i < 10; ++i) space.flags.push_back({"-f" + std::to_string(i), ""});

  std::vector<size_t> first_hits;
  for (uint64_t seed = 1; seed <= 20 && ok; ++seed) {
    SyntheticProgram program = exploration_program(seed * 1000);
    Workbench bench({program}, seed);
    bench.ctx.ids = bench.ids_for(program);

    const double best = exhaustive_best(program, space);
    ExplorationConfig config;
    config.strategy = Strategy::uniform_random;
    config.budget = 500;
    config.seed = seed;
    config.per_flag_probability = 0.5;
    ExplorationReport report = explore(program.descriptor(), space, config, bench.ctx);

    if (report.best_speedup > best + 1e-12) {
      ok = false;
      detail = "found speedup above the exhaustive optimum";
      break;
    }
    size_t hit = 0;
    for (size_t i = 0; i < report.iterations.size(); ++i) {
      if (report.iterations[i].output_correct &&
          report.iterations[i].speedup >= 0.95 * best) {
        hit = i + 1;
        break;
      }
    }
    if (hit == 0) {
      ok = false;
      detail = "run " + std::to_string(seed) + " never reached 95% of the optimum";
      break;
    }
    first_hits.push_back(hit);
  }
  if (ok) {
    std::sort(first_hits.begin(), first_hits.end());
    const size_t median = first_hits[first_hits.size() / 2];
    if (median > 100) {
      ok = false;
      detail = "median first-hit iteration " + std::to_string(median) + " > 100";
    } else {
      detail = "median first-hit iteration " + std::to_string(median);
    }
  }
  criterion(4, "uniform-random search reaches 95% of the exhaustive best", ok, detail);
}

void criterion_5_determinism() {
  auto run_once = [](const fs::path& dir) {
    SyntheticProgram program = exploration_program(31415);
    Repository::CreateOptions options;
    options.created = "2009-06-04 14:06:47";
    options.instance_id = EntityId::parse("314159265358979323846264338327950288419");
    SyntheticBackend backend({program});
    Repository repo = Repository::create(dir, options);
    ExperimentContext ctx{backend, repo, {}, DriverEnv{}, IdGenerator(2718)};
    ctx.env.date = "2009-06-04";
    ctx.env.time = "14:06:47";
    ctx.ids = register_experiment_entities(
        repo, {EntityId{}, "bench-platform", ""}, {EntityId{}, "bench-environment", ""},
        CompilerDescriptor{EntityId{}, "synthetic", "s {SOURCES} {OUTPUT} {FLAGS}", ""},
        program.descriptor(), ctx.idgen);
    FlagSpace space;
    space.base_levels = {"-O3"};
    for (int i = 0; i < 10; ++i) space.flags.push_back({"-f" + std::to_string(i), ""});
    ExplorationConfig config;
    config.strategy = Strategy::uniform_random;
    config.budget = 200;
    config.seed = 51;
    explore(program.descriptor(), space, config, ctx);
    repo.close();
  };
  TempDir a, b;
  run_once(a.path / "db");
  run_once(b.path / "db");
  bool ok = true;
  std::string detail;
  for (const char* name : {"INFORMATION", "entities.pk", "compilations.pk", "executions.pk"}) {
    if (slurp(a.path / "db" / name) != slurp(b.path / "db" / name)) {
      ok = false;
      detail = std::string(name) + " differs between the two runs";
    }
  }
  criterion(5, "seeded exploration reproduces byte-identical repositories", ok, detail);
}

void criterion_6_merge_algebra() {
  bool ok = true;
  std::string detail;
  Rng rng(90210);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    TempDir dir;
    auto build = [&](const fs::path& where, uint64_t seed, size_t cases) {
      Repository repo = Repository::create(where);
      IdGenerator idgen(seed);
      EntityId platform = repo.register_platform({EntityId{}, "p" + std::to_string(seed), ""}, idgen);
      EntityId environment = repo.register_platform({EntityId{}, "e" + std::to_string(seed), ""},
                                                    idgen, EntityKind::environment);
      EntityId compiler = repo.register_compiler(
          {EntityId{}, "c" + std::to_string(seed), "x {SOURCES} {OUTPUT} {FLAGS}", ""}, idgen);
      ProgramDescriptor program;
      program.name = "prog" + std::to_string(seed);
      program.datasets.push_back({1, "input", 1});
      EntityId program_id = repo.register_program(program, idgen);
      for (size_t i = 0; i < cases; ++i) {
        CompilationRecord comp;
        comp.compile_id = idgen.next();
        comp.platform_id = platform;
        comp.environment_id = environment;
        comp.compiler_id = compiler;
        comp.program_id = program_id;
        comp.opt = FlagCombination::parse(i % 2 ? "-O3 -funroll-loops" : "-O2");
        comp.compile_time = 1.0 + static_cast<double>(i);
        comp.bin_size = 1000 + i;
        comp.obj_md5 = "b15359251b3c185dfa180e0e1ad16228";
        comp.date = "2009-06-04";
        comp.time = "14:06:47";
        repo.record(comp);
        ExecutionRecord exec;
        exec.run_id = idgen.next();
        exec.run_id_associate = exec.run_id;
        exec.compile_id = comp.compile_id;
        exec.compiler_id = compiler;
        exec.program_id = program_id;
        exec.platform_id = platform;
        exec.environment_id = environment;
        exec.bin_size = comp.bin_size;
        exec.run_time = 1.0 + rng.next_unit();
        repo.record(exec);
      }
      return repo;
    };

    const size_t a_cases = 1 + rng.next_below(8);
    const size_t b_cases = 1 + rng.next_below(8);
    Repository a = build(dir.path / "a", trial * 31 + 1, a_cases);
    Repository b = build(dir.path / "b", trial * 31 + 2, b_cases);

    // self-merge (fresh copy of a's files) is pure duplicates, idempotent
    fs::copy(dir.path / "a", dir.path / "a_copy", fs::copy_options::recursive);
    fs::remove(dir.path / "a_copy" / "lock");
    Repository a_copy = Repository::open(dir.path / "a_copy", true);
    MergeStats self = Repository::merge(a, a_copy);
    if (self.new_records != 0 || self.duplicates != a.record_count() || self.conflicts != 0) {
      ok = false;
      detail = "self-merge not idempotent at trial " + std::to_string(trial);
      break;
    }

    // disjoint union counts exactly
    const size_t before = a.record_count();
    MergeStats stats = Repository::merge(b, a);
    if (stats.new_records != b.record_count() || a.record_count() != before + b.record_count()) {
      ok = false;
      detail = "disjoint union miscounted at trial " + std::to_string(trial);
      break;
    }

    // conflicting execution: destination value survives
    const ExecutionRecord& victim = b.executions().front();
    ExecutionRecord divergent = victim;
    divergent.run_time = victim.run_time + 5.0;
    fs::copy(dir.path / "b", dir.path / "b_fork", fs::copy_options::recursive);
    fs::remove(dir.path / "b_fork" / "lock");
    {
      // rewrite the fork's executions with the divergent copy appended first
      Repository fork = Repository::open(dir.path / "b_fork", true);
      MergeStats conflict = Repository::merge(fork, a);  // fork == b: all duplicates
      if (conflict.conflicts != 0) {
        ok = false;
        detail = "unexpected conflicts at trial " + std::to_string(trial);
        break;
      }
    }
    TempDir fork_dir;
    Repository fork = Repository::create(fork_dir.path / "db");
    IdGenerator idgen(99);
    for (const auto& entity : b.entities()) {
      fork.register_entity(entity.kind, entity.descriptor, idgen);
    }
    const CompilationRecord* comp = b.find_compilation(victim.compile_id);
    fork.record(*comp);
    fork.record(divergent);
    MergeStats conflict = Repository::merge(fork, a);
    if (conflict.conflicts != 1) {
      ok = false;
      detail = "conflict not detected at trial " + std::to_string(trial);
      break;
    }
    if (a.find_execution(victim.run_id)->run_time != victim.run_time) {
      ok = false;
      detail = "conflict overwrote the destination at trial " + std::to_string(trial);
      break;
    }
  }
  criterion(6, "merge algebra: idempotent, exact disjoint counts, destination wins", ok, detail);
}

// clustered family: the optimum combination is a locally-constant function of
// the feature vector, so the nearest neighbor shares it by construction
std::vector<SyntheticProgram> clustered_family(int clusters, int per_cluster) {
  std::vector<SyntheticProgram> programs;
  Rng rng(60309);
  for (int c = 1; c <= clusters; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      SyntheticProgram program;
      program.name = "c" + std::to_string(c) + "_p" + std::to_string(i);
      program.id = EntityId(static_cast<EntityId::u128>(c) * 10000 + i + 1);
      program.base_time = 10.0;
      program.base_size = 10000;
      program.flag_effects["-fwin" + std::to_string(c)] = {0.4 + 0.02 * c, 1.0};
      program.flag_effects["-fharm"] = {1.3, 1.0};
      program.features.entries = {
          {"ft" + std::to_string(c), 100.0 + i + rng.next_unit()},
          {"ftnoise", rng.next_unit() * 2.0},
      };
      programs.push_back(std::move(program));
    }
  }
  return programs;
}

void criterion_7_leave_one_out() {
  bool ok = true;
  std::string detail;
  Workbench bench(clustered_family(5, 10), 404);
  for (const auto& program : bench.programs) bench.evaluate_exhaustively(program);

  DriverEnv env;
  env.date = "2009-06-04";
  env.time = "14:06:47";
  LooReport nn = leave_one_out_evaluate(bench.repo, ModelKind::nearest_neighbor, Objective::time,
                                        bench.backend, env);
  int perfect = 0;
  for (const auto& entry : nn.entries) {
    if (std::abs(entry.fraction - 1.0) < 1e-9) ++perfect;
  }
  if (nn.entries.size() != 50 || perfect < 48) {
    ok = false;
    detail = "1-NN perfect transfers: " + std::to_string(perfect) + "/50";
  } else {
    detail = "1-NN perfect transfers: " + std::to_string(perfect) + "/50";
  }

  LooReport flags = leave_one_out_evaluate(bench.repo, ModelKind::per_flag_probability,
                                           Objective::time, bench.backend, env);
  if (flags.mean_fraction < 0.9) {
    ok = false;
    detail += "; per-flag mean fraction " + format_float(flags.mean_fraction);
  } else {
    detail += "; per-flag mean fraction " + format_float(flags.mean_fraction);
  }
  criterion(7, "leave-one-out prediction recovers the available speedup", ok, detail);
}

void criterion_8_service_contract() {
  bool ok = true;
  std::string detail;
  Workbench bench(clustered_family(2, 3), 505);
  for (const auto& program : bench.programs) bench.evaluate_exhaustively(program);
  const EntityId compiler = bench.repo.compilations().front().compiler_id;
  const EntityId platform = bench.repo.compilations().front().platform_id;
  bench.repo.close();

  ServiceOptions options;
  options.repo_path = (bench.dir.path / "db").string();
  PredictionService service(std::move(options));
  const int port = service.start("127.0.0.1", 0);

  // the exact-match query must return the training program's best flags
  const SyntheticProgram& target = bench.programs.front();
  Packet query;
  query.add("PLATFORM_ID", platform.str());
  query.add("ENVIRONMENT_ID", "1");
  query.add("COMPILER_ID", compiler.str());
  query.add("MODEL", "nearest_neighbor");
  query.add("OBJECTIVE", "time");
  query.add("STATIC_FEATURE_VECTOR", target.features.serialize_entries());
  const std::string body = query.serialize();

  const std::string response = query_service("127.0.0.1", port, body);
  Packet parsed = parse_packet_fields(response);
  if (parsed.get("STATUS") != "OK") {
    ok = false;
    detail = "status: " + parsed.get("STATUS");
  } else {
    if (parsed.get("DISTANCE") != "0.000000") {
      ok = false;
      detail = "distance " + parsed.get("DISTANCE");
    }
    if (parsed.get("OPT_FLAGS").find("-fwin1") == std::string::npos) {
      ok = false;
      detail += " flags " + parsed.get("OPT_FLAGS");
    }
    if (parsed.get("MATCHED_PROGRAM_ID") != target.id.str()) {
      ok = false;
      detail += " matched " + parsed.get("MATCHED_PROGRAM_ID");
    }
  }

  if (parse_packet_fields(query_service("127.0.0.1", port, "")).get("STATUS") !=
      "MALFORMED_QUERY") {
    ok = false;
    detail += "; malformed body not rejected";
  }

  // 100 concurrent identical queries return identical bodies
  std::vector<std::string> bodies(100);
  std::vector<std::thread> workers;
  for (size_t i = 0; i < bodies.size(); ++i) {
    workers.emplace_back([&, i] {
      try {
        bodies[i] = query_service("127.0.0.1", port, body);
      } catch (const Error&) {
        bodies[i] = "unreachable";
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (const auto& copy : bodies) {
    if (copy != response) {
      ok = false;
      detail += "; concurrent responses diverged";
      break;
    }
  }
  service.stop();
  criterion(8, "prediction service contract: exact match, errors, concurrency", ok, detail);
}

void criterion_9_unidapt_regret() {
  bool ok = true;
  std::string detail;

  AdaptiveProgram program;
  program.program_id = EntityId::parse("8888");
  Clone original;
  original.clone_id = 0;
  original.flags = FlagCombination::parse("-O3");
  original.phase_times = {{1, 1.0}, {2, 2.0}};
  Clone alternative;
  alternative.clone_id = 1;
  alternative.flags = FlagCombination::parse("-O3 -funroll-loops");
  alternative.phase_times = {{1, 2.0}, {2, 1.0}};
  program.clones = {original, alternative};
  program.monitor_overhead = 0.0;

  TraceSpec spec;
  spec.seed = 13;
  spec.segments = {{1, 5000}, {2, 5000}};  // 10000 steps
  FeatureVector f1, f2;
  f1.entries = {{"PAPI_TOT_INS", 1000.0}, {"PAPI_L1_DCM", 10.0}};
  f2.entries = {{"PAPI_TOT_INS", 9000.0}, {"PAPI_L1_DCM", 500.0}};
  spec.phase_features = {{1, f1}, {2, f2}};
  spec.phase_sigma = {{1, 0.01}, {2, 0.01}};
  PhaseTrace trace = PhaseTrace::generate(spec);

  SimReport report = simulate(program, trace, AdaptationPolicy{});
  const double oracle = 10000.0;  // each step served by its 1.0 s clone
  if (std::abs(report.oracle_time - oracle) > 1e-6) {
    ok = false;
    detail = "oracle time " + format_float(report.oracle_time);
  }
  for (const auto& step : report.steps) {
    if (step.calibration) continue;
    const int best = step.phase_id == 1 ? 0 : 1;
    if (step.clone_id != best) {
      ok = false;
      detail = "post-calibration selection missed the oracle";
      break;
    }
  }
  if (report.regret >= 0.01) {
    ok = false;
    detail += "; zero-overhead regret " + format_float(report.regret);
  } else {
    detail += "zero-overhead regret " + format_float(report.regret);
  }

  program.monitor_overhead = 0.002;
  SimReport taxed = simulate(program, trace, AdaptationPolicy{});
  if (taxed.regret >= 0.015) {
    ok = false;
    detail += "; 0.2% overhead regret " + format_float(taxed.regret);
  } else {
    detail += "; 0.2% overhead regret " + format_float(taxed.regret);
  }
  criterion(9, "multiversioning adaptation regret stays under 1% / 1.5%", ok, detail);
}

void criterion_10_speedup_arithmetic() {
  CompilationRecord baseline_comp;
  baseline_comp.compile_id = EntityId::parse("10");
  baseline_comp.compile_time = 69.0;
  baseline_comp.bin_size = 48870;
  CompilationRecord comp = baseline_comp;
  comp.compile_id = EntityId::parse("11");

  ExecutionRecord baseline;
  baseline.run_id = EntityId::parse("100");
  baseline.run_id_associate = baseline.run_id;
  baseline.compile_id = baseline_comp.compile_id;
  baseline.run_time = 16.355512;
  baseline.bin_size = 48870;
  ExecutionRecord fast = baseline;
  fast.run_id = EntityId::parse("101");
  fast.run_id_associate = baseline.run_id;
  fast.compile_id = comp.compile_id;
  fast.run_time = 8.177756;

  OptimizationCase result = derive_case(comp, {fast}, {baseline}, baseline_comp);
  const bool ok = std::abs(result.speedup - 2.0) <= 1e-9;
  criterion(10, "derive_case on the documented baseline pair yields speedup 2.0 within 1e-9", ok,
            ok ? "" : format_float(result.speedup));
}

}  // namespace

int main() {
  criterion_1_packet_round_trip();
  criterion_2_pareto_oracle();
  criterion_3_pruning_minimality();
  criterion_4_exploration_convergence();
  criterion_5_determinism();
  criterion_6_merge_algebra();
  criterion_7_leave_one_out();
  criterion_8_service_contract();
  criterion_9_unidapt_regret();
  criterion_10_speedup_arithmetic();

  if (failures == 0) {
    std::puts("acceptance: all criteria passed");
    return 0;
  }
  std::printf("acceptance: %d criteria failed\n", failures);
  return 1;
}
