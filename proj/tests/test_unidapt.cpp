#include <doctest.h>

#include <filesystem>
#include <random>

#include "ctune/error.hpp"
#include "ctune/rng.hpp"
#include "ctune/unidapt.hpp"

using namespace ctune;
namespace fs = std::filesystem;

namespace {

// two phases, each clone best in one of them
AdaptiveProgram two_phase_program(double overhead = 0.0) {
  AdaptiveProgram program;
  program.program_id = EntityId::parse("31337");
  program.monitor_overhead = overhead;
  Clone original;
  original.clone_id = 0;
  original.flags = FlagCombination::parse("-O3");
  original.phase_times = {{1, 1.0}, {2, 2.0}};
  Clone tuned;
  tuned.clone_id = 1;
  tuned.flags = FlagCombination::parse("-O3 -funroll-loops");
  tuned.phase_times = {{1, 2.0}, {2, 1.0}};
  program.clones = {original, tuned};
  return program;
}

TraceSpec two_phase_spec(long per_phase, uint64_t seed = 5) {
  TraceSpec spec;
  spec.seed = seed;
  spec.segments = {{1, per_phase}, {2, per_phase}};
  FeatureVector phase1;
  phase1.entries = {{"PAPI_TOT_INS", 1000.0}, {"PAPI_L1_DCM", 10.0}};
  FeatureVector phase2;
  phase2.entries = {{"PAPI_TOT_INS", 9000.0}, {"PAPI_L1_DCM", 500.0}};
  spec.phase_features = {{1, phase1}, {2, phase2}};
  spec.phase_sigma = {{1, 0.01}, {2, 0.01}};
  return spec;
}

}  // namespace

TEST_CASE("a single clone leaves no choice and no regret beyond overhead") {
  AdaptiveProgram program = two_phase_program();
  program.clones.resize(1);
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(100));
  SimReport report = simulate(program, trace, AdaptationPolicy{});
  for (const auto& step : report.steps) CHECK(step.clone_id == 0);
  CHECK(report.regret == doctest::Approx(0.0));
}

TEST_CASE("two-phase adaptation converges to the oracle after calibration") {
  AdaptiveProgram program = two_phase_program(0.0);
  const long per_phase = 5000;
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(per_phase));
  AdaptationPolicy policy;
  SimReport report = simulate(program, trace, policy);

  // closed-form oracle: each phase served by its 1.0s clone
  const double oracle = 2.0 * static_cast<double>(per_phase) * 1.0;
  CHECK(report.oracle_time == doctest::Approx(oracle));
  CHECK(report.total_time >= report.oracle_time);
  CHECK(report.regret >= 0.0);
  CHECK(report.regret < 0.01);

  // every non-calibration step picks the per-phase best clone
  for (const auto& step : report.steps) {
    if (step.calibration) continue;
    const int best = step.phase_id == 1 ? 0 : 1;
    REQUIRE(step.clone_id == best);
  }

  // the table rows carry the argmin clone with evidence
  for (const auto& row : report.table) {
    CHECK(row.evidence >= 1);
  }
}

TEST_CASE("monitoring overhead shifts total time but not the choices") {
  const long per_phase = 5000;
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(per_phase));
  SimReport free_run = simulate(two_phase_program(0.0), trace, AdaptationPolicy{});
  SimReport taxed = simulate(two_phase_program(0.002), trace, AdaptationPolicy{});
  REQUIRE(free_run.steps.size() == taxed.steps.size());
  for (size_t i = 0; i < free_run.steps.size(); ++i) {
    CHECK(free_run.steps[i].clone_id == taxed.steps[i].clone_id);
  }
  CHECK(taxed.total_time == doctest::Approx(free_run.total_time * 1.002));
  CHECK(taxed.regret < 0.015);
}

TEST_CASE("the empty trace is rejected") {
  AdaptiveProgram program = two_phase_program();
  PhaseTrace empty;
  CHECK_THROWS_WITH_AS(simulate(program, empty, AdaptationPolicy{}),
                       doctest::Contains("EMPTY_TRACE"), Error);
}

TEST_CASE("simulation is deterministic for identical inputs") {
  AdaptiveProgram program = two_phase_program(0.002);
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(500, 9));
  SimReport a = simulate(program, trace, AdaptationPolicy{});
  SimReport b = simulate(program, trace, AdaptationPolicy{});
  CHECK(a.total_time == b.total_time);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].clone_id == b.steps[i].clone_id);
    CHECK(a.steps[i].signature == b.steps[i].signature);
  }
  // trace generation itself replays from the seed
  PhaseTrace again = PhaseTrace::generate(two_phase_spec(500, 9));
  REQUIRE(again.steps.size() == trace.steps.size());
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    CHECK(again.steps[i].features.entries == trace.steps[i].features.entries);
  }
}

TEST_CASE("identical feature vectors quantize to identical signatures") {
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(200));
  FeatureQuantizer quantizer(trace, 8);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVector features;
    features.entries = {{"PAPI_TOT_INS", rng.next_unit() * 10000},
                        {"PAPI_L1_DCM", rng.next_unit() * 600}};
    FeatureVector copy = features;
    REQUIRE(quantizer.signature(features) == quantizer.signature(copy));
  }
  // the two phases land in different buckets
  CHECK(quantizer.signature(two_phase_spec(1).phase_features.at(1)) !=
        quantizer.signature(two_phase_spec(1).phase_features.at(2)));
}

TEST_CASE("recalibration keeps sampling without losing the steady state") {
  AdaptiveProgram program = two_phase_program();
  PhaseTrace trace = PhaseTrace::generate(two_phase_spec(4000));
  AdaptationPolicy policy;
  policy.recalibration_interval = 500;
  SimReport report = simulate(program, trace, policy);
  size_t calibrations = 0;
  for (const auto& step : report.steps) {
    if (step.calibration) ++calibrations;
  }
  CHECK(calibrations > 4);               // initial plus periodic refreshes
  CHECK(calibrations < report.steps.size() / 10);
  CHECK(report.regret < 0.01);
}

TEST_CASE("program and trace definitions round-trip through packets") {
  AdaptiveProgram program = two_phase_program(0.002);
  const std::string text = serialize_packet_stream(program.to_packets());
  AdaptiveProgram loaded = AdaptiveProgram::from_packets(parse_packet_stream(text));
  CHECK(loaded.program_id == program.program_id);
  REQUIRE(loaded.clones.size() == program.clones.size());
  CHECK(loaded.clones[1].phase_times == program.clones[1].phase_times);
  CHECK(loaded.monitor_overhead == doctest::Approx(program.monitor_overhead));

  SimReport report = simulate(loaded, PhaseTrace::generate(two_phase_spec(100)),
                              AdaptationPolicy{});
  CHECK(!report.to_csv().empty());
  CHECK(!serialize_packet_stream(report.to_packets()).empty());
}

TEST_CASE("clone evolution replaces the worst clones from the repository frontier") {
  struct TempDir {
    fs::path path;
    TempDir() {
      path = fs::temp_directory_path() /
             ("ctune_uni_" + std::to_string(Rng(std::random_device{}()).next_u64()));
      fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
  } dir;

  AdaptiveProgram program = two_phase_program();
  Clone laggard;
  laggard.clone_id = 2;
  laggard.flags = FlagCombination::parse("-O0");
  laggard.phase_times = {{1, 9.9}, {2, 9.9}};
  program.clones.push_back(laggard);

  Repository repo = Repository::create(dir.path / "db");
  IdGenerator idgen(77);
  EntityId platform = repo.register_platform({EntityId{}, "platform", ""}, idgen);
  EntityId environment =
      repo.register_platform({EntityId{}, "environment", ""}, idgen, EntityKind::environment);
  EntityId compiler = repo.register_compiler(
      {EntityId{}, "synthetic", "s {SOURCES} {OUTPUT} {FLAGS}", ""}, idgen);
  ProgramDescriptor descriptor;
  descriptor.id = program.program_id;
  descriptor.name = "adaptive";
  descriptor.datasets.push_back({1, "input", 1});
  EntityId program_id = repo.register_program(descriptor, idgen);

  auto record_pair = [&](const char* flags, double run_time) {
    CompilationRecord comp;
    comp.compile_id = idgen.next();
    comp.platform_id = platform;
    comp.environment_id = environment;
    comp.compiler_id = compiler;
    comp.program_id = program_id;
    comp.opt = FlagCombination::parse(flags);
    comp.compile_time = 1.0;
    comp.bin_size = 1000;
    comp.obj_md5 = "00000000000000000000000000000000";
    comp.date = "2009-06-04";
    comp.time = "14:06:47";
    repo.record(comp);
    ExecutionRecord base;
    base.run_id = idgen.next();
    base.run_id_associate = base.run_id;
    base.compile_id = comp.compile_id;
    base.compiler_id = compiler;
    base.program_id = program_id;
    base.platform_id = platform;
    base.environment_id = environment;
    base.bin_size = 1000;
    base.run_time = 10.0;
    repo.record(base);
    ExecutionRecord run = base;
    run.run_id = idgen.next();
    run.run_id_associate = base.run_id;
    run.run_time = run_time;
    repo.record(run);
  };
  record_pair("-O3 -fnew-combo", 4.0);  // speedup 2.5, unused by any clone

  // k = 0 leaves the program untouched
  AdaptiveProgram same = evolve_clones(program, repo, 0);
  CHECK(same.clones.size() == program.clones.size());
  CHECK(same.clones[2].phase_times.at(1) == doctest::Approx(9.9));

  AdaptiveProgram evolved = evolve_clones(program, repo, 1);
  REQUIRE(evolved.clones.size() == 3);
  // the 9.9s laggard is gone, replaced by the frontier combination
  for (const auto& clone : evolved.clones) {
    CHECK(clone.phase_times.at(1) < 9.0);
  }
  bool has_new = false;
  for (const auto& clone : evolved.clones) {
    if (clone.flags.contains("-fnew-combo")) {
      has_new = true;
      // phase times scale the original by the measured speedup
      CHECK(clone.phase_times.at(1) == doctest::Approx(1.0 / 2.5));
      CHECK(clone.phase_times.at(2) == doctest::Approx(2.0 / 2.5));
    }
  }
  CHECK(has_new);
  // clone 0 survives
  CHECK(evolved.clones[0].clone_id == 0);

  // exhausted candidates: every frontier combination already in use
  CHECK_THROWS_WITH_AS(evolve_clones(evolved, repo, 1), doctest::Contains("NO_CANDIDATES"),
                       Error);
}
