#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "ctune/driver.hpp"
#include "ctune/error.hpp"
#include "ctune/process.hpp"
#include "ctune/real_backend.hpp"
#include "ctune/rng.hpp"
#include "ctune/synthetic.hpp"

using namespace ctune;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ctune_drv_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SyntheticProgram sample_program() {
  SyntheticProgram program;
  program.id = EntityId::parse("1487849553352134");
  program.name = "susan_corners";
  program.base_time = 10.0;
  program.base_size = 48870;
  program.flag_effects["-fa"] = {0.8, 0.9};
  program.flag_effects["-fb"] = {0.5, 1.0};
  program.flag_effects["-fnoop"] = {1.0, 1.0};
  program.interactions.push_back({{"-fa", "-fb"}, 1.5});
  program.dataset_count = 2;
  program.dataset_modifiers[2] = 1.3;
  program.features.entries = {{"ft1", 9.0}, {"ft2", 4.0}};
  return program;
}

// independent evaluation of the surrogate product formula
double oracle_time(const SyntheticProgram& p, const FlagCombination& combo, int dataset) {
  double t = p.base_time;
  for (const auto& flag : combo.flags) {
    auto it = p.flag_effects.find(flag);
    if (it != p.flag_effects.end()) t *= it->second.first;
  }
  auto base_it = p.flag_effects.find(combo.base_level);
  if (base_it != p.flag_effects.end()) t *= base_it->second.first;
  for (const auto& [set, mult] : p.interactions) {
    bool active = true;
    for (const auto& flag : set) {
      if (!combo.contains(flag) && flag != combo.base_level) active = false;
    }
    if (active) t *= mult;
  }
  auto mod = p.dataset_modifiers.find(dataset);
  if (mod != p.dataset_modifiers.end()) t *= mod->second;
  return t;
}

}  // namespace

TEST_CASE("surrogate identity: no flags at base level") {
  SyntheticProgram program = sample_program();
  SyntheticBackend backend({program});
  DriverEnv env;
  CompileOutcome outcome = backend.compile(program.descriptor(), FlagCombination{"-O3"}, env);
  CHECK(outcome.success);
  CHECK(outcome.bin_size == program.base_size);
  RunOutcome run = backend.run(program.descriptor(), FlagCombination{"-O3"}, 1, 1, env, nullptr);
  CHECK(run.times[0].wall == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(run.output_correct);  // baseline runs are correct by definition
}

TEST_CASE("surrogate size and time effects match hand-computed products") {
  SyntheticProgram program = sample_program();
  SyntheticBackend backend({program});
  DriverEnv env;

  // 48870 x 0.9 = 43983
  FlagCombination with_a = FlagCombination::parse("-O3 -fa");
  CHECK(backend.compile(program.descriptor(), with_a, env).bin_size == 43983);

  // single flag: 10.0 x 0.8 = 8.0
  RunOutcome run_a = backend.run(program.descriptor(), with_a, 1, 1, env, nullptr);
  CHECK(run_a.times[0].wall == doctest::Approx(8.0).epsilon(1e-15));

  // interaction: 10.0 x 0.8 x 0.5 x 1.5 = 6.0
  FlagCombination both = FlagCombination::parse("-O3 -fa -fb");
  RunOutcome run_ab = backend.run(program.descriptor(), both, 1, 1, env, nullptr);
  CHECK(run_ab.times[0].wall == doctest::Approx(6.0).epsilon(1e-15));

  // dataset modifier applies multiplicatively
  RunOutcome run_ds2 = backend.run(program.descriptor(), both, 2, 1, env, nullptr);
  CHECK(run_ds2.times[0].wall == doctest::Approx(6.0 * 1.3).epsilon(1e-15));
}

TEST_CASE("noiseless surrogate equals the closed-form oracle to 1e-12") {
  Rng rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    SyntheticProgram program;
    program.id = EntityId(rng.next_u64() | 1);
    program.name = "p" + std::to_string(trial);
    program.base_time = 1.0 + rng.next_unit() * 20.0;
    program.base_size = 1000 + rng.next_below(100000);
    std::vector<std::string> flags;
    for (int i = 0; i < 8; ++i) {
      std::string flag = "-f" + std::to_string(i);
      flags.push_back(flag);
      program.flag_effects[flag] = {0.5 + rng.next_unit(), 0.5 + rng.next_unit()};
    }
    if (rng.next_bernoulli(0.5)) {
      program.interactions.push_back({{flags[0], flags[1]}, 0.5 + rng.next_unit()});
    }
    program.dataset_count = 2;
    program.dataset_modifiers[2] = 0.5 + rng.next_unit();

    SyntheticBackend backend({program});
    DriverEnv env;
    FlagCombination combo;
    combo.base_level = "-O3";
    for (const auto& flag : flags) {
      if (rng.next_bernoulli(0.5)) combo.flags.push_back(flag);
    }
    const int dataset = 1 + static_cast<int>(rng.next_below(2));
    RunOutcome run = backend.run(program.descriptor(), combo, dataset, 1, env, nullptr);
    const double expected = oracle_time(program, combo, dataset);
    REQUIRE(run.times[0].wall == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("surrogate determinism across backend instances and noise replay") {
  SyntheticProgram program = sample_program();
  program.noise_sigma = 0.03;
  DriverEnv env;
  env.seed = 12345;
  FlagCombination combo = FlagCombination::parse("-O3 -fa");

  SyntheticBackend one({program});
  SyntheticBackend two({program});
  RunOutcome a = one.run(program.descriptor(), combo, 1, 5, env, nullptr);
  RunOutcome b = two.run(program.descriptor(), combo, 1, 5, env, nullptr);
  REQUIRE(a.times.size() == 5);
  for (size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.times[i].wall == b.times[i].wall);
  }

  DriverEnv other_seed = env;
  other_seed.seed = 999;
  RunOutcome c = one.run(program.descriptor(), combo, 1, 5, other_seed, nullptr);
  CHECK(a.times[0].wall != c.times[0].wall);
}

TEST_CASE("object identity collides exactly for no-effect flags") {
  SyntheticProgram program = sample_program();
  SyntheticBackend backend({program});
  DriverEnv env;
  auto md5_of = [&](const char* flags) {
    return backend.compile(program.descriptor(), FlagCombination::parse(flags), env).obj_md5;
  };
  CHECK(md5_of("-O3 -fa") == md5_of("-O3 -fa -fnoop"));
  CHECK(md5_of("-O3 -fa") != md5_of("-O3 -fb"));
  CHECK(md5_of("-O3 -fa") != md5_of("-O3"));
}

TEST_CASE("run outcome carries exactly `repeats` timings") {
  SyntheticProgram program = sample_program();
  SyntheticBackend backend({program});
  DriverEnv env;
  for (int repeats : {1, 3, 7}) {
    RunOutcome run =
        backend.run(program.descriptor(), FlagCombination{"-O3"}, 1, repeats, env, nullptr);
    CHECK(run.times.size() == static_cast<size_t>(repeats));
  }
}

TEST_CASE("driver records and skip_if_unchanged reuses by md5/program/dataset") {
  TempDir dir;
  SyntheticProgram program = sample_program();
  SyntheticBackend backend({program});
  Repository repo = Repository::create(dir.path / "db");
  DriverEnv env;
  env.date = "2009-06-04";
  env.time = "14:06:47";
  ExperimentContext ctx{backend, repo, {}, env, IdGenerator(9)};
  ctx.ids = register_experiment_entities(
      repo, {EntityId{}, "platform", ""}, {EntityId{}, "environment", ""},
      CompilerDescriptor{EntityId{}, "synthetic", "x {SOURCES} {OUTPUT} {FLAGS}", ""},
      program.descriptor(), ctx.idgen);

  auto [comp, comp_outcome] = compile_program(ctx, program.descriptor(), FlagCombination{"-O3"});
  repo.record(comp);
  auto [exec, run_outcome] = run_program(ctx, program.descriptor(), comp, FlagCombination{"-O3"},
                                         1, 3, /*is_baseline=*/true, nullptr);
  repo.record(exec);
  CHECK(exec.is_baseline());
  CHECK(exec.repeat_times().size() == 3);

  // same object, same dataset: cached
  auto cached = skip_if_unchanged(repo, comp.obj_md5, ctx.ids.program, 1);
  REQUIRE(cached.has_value());
  CHECK(cached->run_id == exec.run_id);
  // unseen md5 and other datasets stay uncached
  CHECK_FALSE(skip_if_unchanged(repo, "ffffffffffffffffffffffffffffffff", ctx.ids.program, 1));
  CHECK_FALSE(skip_if_unchanged(repo, comp.obj_md5, ctx.ids.program, 2).has_value());

  // non-baseline run without a reference is refused
  CHECK_THROWS_WITH_AS(run_program(ctx, program.descriptor(), comp, FlagCombination{"-O3"}, 1, 1,
                                   false, nullptr),
                       doctest::Contains("MISSING_REFERENCE"), Error);

  // simulator runtimes are accepted but rejected as unsupported
  ExperimentContext re_ctx = ctx;
  re_ctx.env.run_re = "unisim";
  CHECK_THROWS_WITH_AS(run_program(re_ctx, program.descriptor(), comp, FlagCombination{"-O3"}, 1,
                                   1, true, nullptr),
                       doctest::Contains("UNSUPPORTED_RUNTIME"), Error);
}

TEST_CASE("dataset descriptor file parses the documented layout") {
  const std::string text =
      "3\n"
      "====\n"
      "1\n"
      "../../automotive_susan_data/1.pgm output_large.corners.pgm -c > ftmp_out\n"
      "10\n"
      "====\n"
      "2\n"
      "../../automotive_susan_data/2.pgm output_large.corners.pgm -c > ftmp_out\n"
      "20\n"
      "====\n"
      "3\n"
      "../../automotive_susan_data/3.pgm output_large.corners.pgm -c > ftmp_out\n"
      "30\n"
      "====\n";
  std::vector<DatasetEntry> datasets = parse_dataset_descriptor(text);
  REQUIRE(datasets.size() == 3);
  CHECK(datasets[0].number == 1);
  CHECK(datasets[1].loop_wrapper_bound == 20);
  CHECK(datasets[2].command_line.find("3.pgm") != std::string::npos);

  CHECK_THROWS_AS(parse_dataset_descriptor("2\n====\n1\ncmd\n5\n====\n"), Error);  // count off
}

TEST_CASE("command runner: output capture, rusage, timeout kills the whole group") {
  ExecResult ok = run_command("echo hello; echo err >&2", ".", {}, 10.0);
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("hello") != std::string::npos);
  CHECK(ok.output.find("err") != std::string::npos);
  CHECK(ok.wall > 0.0);

  ExecResult env_check = run_command("echo bound=$CCC_LOOP_WRAPPER", ".",
                                     {{"CCC_LOOP_WRAPPER", "42"}}, 10.0);
  CHECK(env_check.output.find("bound=42") != std::string::npos);

  // a grandchild keeps a heartbeat file warm; after the timeout kill the
  // heartbeat must stop, or something in the group survived
  TempDir dir;
  const std::string heart = (dir.path / "heartbeat").string();
  ExecResult timed = run_command(
      "sh -c 'while true; do echo x >> " + heart + "; sleep 0.05; done' & sleep 30", ".", {}, 0.4);
  CHECK(timed.timed_out);
  REQUIRE(fs::exists(heart));
  const auto size_then = fs::file_size(heart);
  run_command("sleep 0.5", ".", {}, 5.0);
  CHECK(fs::file_size(heart) == size_then);
}

TEST_CASE("real backend drives an installed compiler end to end") {
  if (run_command("command -v gcc", ".", {}, 10.0).exit_code != 0) {
    return;  // no compiler on this host
  }
  TempDir dir;
  {
    std::ofstream src(dir.path / "main.c");
    src << "#include <stdio.h>\n#include <stdlib.h>\n"
        << "int main(int argc, char** argv) {\n"
        << "  FILE* f = fopen(\"result.out\", \"w\");\n"
        << "  const char* bound = getenv(\"CCC_LOOP_WRAPPER\");\n"
        << "  long n = bound ? atol(bound) : 1;\n"
        << "  long long acc = 0;\n"
        << "  for (long i = 0; i < n * 100000; ++i) acc += i % 7;\n"
        << "  fprintf(f, \"acc=%lld argc=%d\\n\", acc, argc);\n"
        << "  fclose(f);\n  return 0;\n}\n";
  }
  CompilerDescriptor gcc;
  gcc.name = "gcc";
  gcc.invocation_template = "gcc {FLAGS} {SOURCES} -o {OUTPUT}";
  RealBackend backend(gcc, dir.path);

  ProgramDescriptor program;
  program.id = EntityId::parse("77");
  program.name = "acc";
  program.source_dir = dir.path.string();
  program.datasets.push_back({1, "input_one", 2});

  DriverEnv env;
  CompileOutcome o2 = backend.compile(program, FlagCombination::parse("-O2"), env);
  REQUIRE(o2.success);
  CHECK(o2.bin_size > 0);
  CHECK(o2.obj_md5.size() == 32);
  CHECK(o2.compile_time > 0.0);

  // reference run captures outputs; identical rerun validates correct
  RunOutcome reference = backend.run(program, FlagCombination::parse("-O2"), 1, 2, env, nullptr);
  REQUIRE(reference.times.size() == 2);
  CHECK(reference.output_correct);
  REQUIRE(reference.outputs.files.size() == 1);
  CHECK(reference.outputs.files[0].first == "result.out");

  CompileOutcome o0 = backend.compile(program, FlagCombination::parse("-O0"), env);
  REQUIRE(o0.success);
  CHECK(o0.obj_md5 != o2.obj_md5);
  RunOutcome candidate =
      backend.run(program, FlagCombination::parse("-O0"), 1, 1, env, &reference.outputs);
  CHECK(candidate.output_correct);

  // a compile failure carries its log
  CHECK_THROWS_AS(
      [&] {
        CompilerDescriptor broken;
        broken.name = "gcc";
        broken.invocation_template = "gcc {FLAGS} {SOURCES} -o {OUTPUT} -Werror=undef -DBAD=";
        TempDir bad_dir;
        std::ofstream bad(bad_dir.path / "main.c");
        bad << "int main() { return notdeclared; }\n";
        bad.close();
        RealBackend bad_backend(broken, bad_dir.path);
        ProgramDescriptor bad_program = program;
        bad_program.source_dir = bad_dir.path.string();
        CompileOutcome outcome = bad_backend.compile(bad_program, FlagCombination{}, env);
        if (!outcome.success) raise(errc::compile_failed, outcome.log);
      }(),
      Error);
}
