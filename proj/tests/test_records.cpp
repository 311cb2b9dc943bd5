#include <doctest.h>

#include <algorithm>

#include "ctune/error.hpp"
#include "ctune/records.hpp"
#include "ctune/rng.hpp"

using namespace ctune;

namespace {

CompilationRecord make_comp(const char* id, double compile_time, uint64_t bin_size) {
  CompilationRecord record;
  record.compile_id = EntityId::parse(id);
  record.platform_id = EntityId::parse("1");
  record.environment_id = EntityId::parse("1");
  record.compiler_id = EntityId::parse("1");
  record.program_id = EntityId::parse("1");
  record.compile_time = compile_time;
  record.bin_size = bin_size;
  record.obj_md5 = "00000000000000000000000000000000";
  return record;
}

ExecutionRecord make_exec(const char* run_id, const char* associate, double run_time,
                          int dataset = 1) {
  ExecutionRecord record;
  record.run_id = EntityId::parse(run_id);
  record.run_id_associate = EntityId::parse(associate);
  record.compile_id = EntityId::parse("1");
  record.compiler_id = EntityId::parse("1");
  record.program_id = EntityId::parse("1");
  record.platform_id = EntityId::parse("1");
  record.environment_id = EntityId::parse("1");
  record.dataset_number = dataset;
  record.bin_size = 100;
  record.run_time = run_time;
  return record;
}

// independent median for the oracle side of the aggregator checks
double median_oracle(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

TEST_CASE("speedup from the documented baseline pair is exactly 2") {
  CompilationRecord baseline_comp = make_comp("10", 69.0, 48870);
  ExecutionRecord baseline = make_exec("100", "100", 16.355512);
  CompilationRecord comp = make_comp("11", 69.0, 48870);
  comp.program_id = baseline_comp.program_id;
  ExecutionRecord fast = make_exec("101", "100", 8.177756);
  fast.compile_id = comp.compile_id;

  OptimizationCase result = derive_case(comp, {fast}, {baseline}, baseline_comp);
  CHECK(result.speedup == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("deriving a case against itself gives unit ratios") {
  CompilationRecord comp = make_comp("10", 3.5, 1234);
  ExecutionRecord exec = make_exec("100", "100", 7.25);
  OptimizationCase result = derive_case(comp, {exec}, {exec}, comp);
  CHECK(result.speedup == doctest::Approx(1.0));
  CHECK(result.size_ratio == doctest::Approx(1.0));
  CHECK(result.compile_time_ratio == doctest::Approx(1.0));
}

TEST_CASE("median aggregation over repeated runs") {
  // oracle: median{10.0, 10.2, 9.8} = 10.0, median{5.0, 5.1, 4.9} = 5.0
  CHECK(median_oracle({10.0, 10.2, 9.8}) == doctest::Approx(10.0));
  CHECK(median_oracle({5.0, 5.1, 4.9}) == doctest::Approx(5.0));

  CompilationRecord baseline_comp = make_comp("10", 1.0, 100);
  CompilationRecord comp = make_comp("11", 1.0, 100);
  std::vector<ExecutionRecord> baselines = {make_exec("100", "100", 10.0),
                                            make_exec("102", "100", 10.2),
                                            make_exec("103", "100", 9.8)};
  std::vector<ExecutionRecord> fast = {make_exec("201", "100", 5.0),
                                       make_exec("202", "100", 5.1),
                                       make_exec("203", "100", 4.9)};
  OptimizationCase result = derive_case(comp, fast, baselines, baseline_comp, Aggregator::median);
  CHECK(result.speedup == doctest::Approx(10.0 / 5.0).epsilon(1e-12));

  // the same repeats can live inside one record as RUN_TIME1..N
  ExecutionRecord folded = make_exec("300", "100", 10.0);
  folded.extensions.emplace_back("RUN_TIME1", "10.000000");
  folded.extensions.emplace_back("RUN_TIME2", "10.200000");
  folded.extensions.emplace_back("RUN_TIME3", "9.800000");
  CHECK(folded.repeat_times().size() == 3);
  OptimizationCase folded_case =
      derive_case(comp, {make_exec("301", "300", 5.0)}, {folded}, baseline_comp);
  CHECK(folded_case.speedup == doctest::Approx(2.0));
}

TEST_CASE("aggregators: min, median, mean") {
  std::vector<double> times{3.0, 1.0, 2.0, 10.0};
  CHECK(aggregate_times(times, Aggregator::min_time) == doctest::Approx(1.0));
  CHECK(aggregate_times(times, Aggregator::mean) == doctest::Approx(4.0));
  CHECK(aggregate_times(times, Aggregator::median) == doctest::Approx(median_oracle(times)));
  CHECK_THROWS_AS(aggregate_times({}, Aggregator::median), Error);
  CHECK(aggregator_from_name("median") == Aggregator::median);
  CHECK_THROWS_AS(aggregator_from_name("p99"), Error);
}

TEST_CASE("derive_case error paths") {
  CompilationRecord baseline_comp = make_comp("10", 1.0, 100);
  CompilationRecord comp = make_comp("11", 1.0, 100);
  ExecutionRecord baseline = make_exec("100", "100", 10.0);

  SUBCASE("dataset mismatch") {
    ExecutionRecord other = make_exec("101", "100", 5.0, 2);
    CHECK_THROWS_WITH_AS(derive_case(comp, {other}, {baseline}, baseline_comp),
                         doctest::Contains("DATASET_MISMATCH"), Error);
  }
  SUBCASE("wrong baseline association") {
    ExecutionRecord other = make_exec("101", "999", 5.0);
    CHECK_THROWS_AS(derive_case(comp, {other}, {baseline}, baseline_comp), Error);
  }
  SUBCASE("zero time") {
    ExecutionRecord other = make_exec("101", "100", 0.0);
    CHECK_THROWS_WITH_AS(derive_case(comp, {other}, {baseline}, baseline_comp),
                         doctest::Contains("ZERO_TIME"), Error);
  }
  SUBCASE("incorrect output rejects the case") {
    ExecutionRecord other = make_exec("101", "100", 5.0);
    other.output_correct = false;
    CHECK_THROWS_WITH_AS(derive_case(comp, {other}, {baseline}, baseline_comp),
                         doctest::Contains("INCORRECT_OUTPUT"), Error);
  }
  SUBCASE("no executions") {
    CHECK_THROWS_AS(derive_case(comp, {}, {baseline}, baseline_comp), Error);
  }
}

TEST_CASE("speedup is transitive under one aggregator") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    CompilationRecord comp_a = make_comp("11", 1.0, 100);
    CompilationRecord comp_b = make_comp("12", 1.0, 100);
    CompilationRecord comp_c = make_comp("13", 1.0, 100);
    const double ta = rng.next_unit() * 10 + 0.1;
    const double tb = rng.next_unit() * 10 + 0.1;
    const double tc = rng.next_unit() * 10 + 0.1;

    ExecutionRecord b_base = make_exec("100", "100", tb);
    ExecutionRecord c_base = make_exec("200", "200", tc);
    ExecutionRecord a_vs_b = make_exec("101", "100", ta);
    ExecutionRecord b_vs_c = make_exec("201", "200", tb);
    ExecutionRecord a_vs_c = make_exec("202", "200", ta);

    const double ab = derive_case(comp_a, {a_vs_b}, {b_base}, comp_b).speedup;
    const double bc = derive_case(comp_b, {b_vs_c}, {c_base}, comp_c).speedup;
    const double ac = derive_case(comp_a, {a_vs_c}, {c_base}, comp_c).speedup;
    REQUIRE(ab * bc == doctest::Approx(ac).epsilon(1e-9));
  }
}

TEST_CASE("flag combinations stay canonical and reject duplicates") {
  FlagCombination combo = FlagCombination::parse("-O3 -funroll-loops -ftracer", "-msse2 -mA7");
  CHECK(combo.base_level == "-O3");
  CHECK(combo.flags == std::vector<std::string>{"-funroll-loops", "-ftracer"});
  CHECK(combo.platform_flags == std::vector<std::string>{"-msse2", "-mA7"});
  CHECK(combo.canonical() == "-O3 -funroll-loops -ftracer");

  CHECK_THROWS_AS(FlagCombination::parse("-O3 -ftracer -ftracer"), Error);
  FlagCombination overlap;
  overlap.flags = {"-ftracer"};
  overlap.platform_flags = {"-ftracer"};
  CHECK_THROWS_AS(overlap.validate(), Error);

  // no base level: plain flag list
  FlagCombination bare = FlagCombination::parse("-funroll-loops");
  CHECK(bare.base_level.empty());
  CHECK(bare.canonical() == "-funroll-loops");
}

TEST_CASE("feature vector entries parse the documented spacing") {
  FeatureVector vector;
  vector.entries = FeatureVector::parse_entries(" ft1=9, ft2=4, ft3=2, ft4=0, ...");
  REQUIRE(vector.entries.size() == 4);
  CHECK(vector.entries[0].first == "ft1");
  CHECK(vector.entries[0].second == doctest::Approx(9.0));
  CHECK(vector.entries[3].second == doctest::Approx(0.0));
  CHECK_THROWS_AS(FeatureVector::parse_entries("ft1=1, ft1=2"), Error);
  // serialize -> parse identity
  const std::string text = vector.serialize_entries();
  CHECK(FeatureVector::parse_entries(text) == vector.entries);
}

TEST_CASE("program descriptors enforce contiguous 1-based datasets") {
  ProgramDescriptor program;
  program.name = "susan";
  for (int i = 1; i <= 20; ++i) {
    program.datasets.push_back({i, "input." + std::to_string(i), 10});
  }
  CHECK_NOTHROW(program.validate());
  CHECK(program.dataset_count() == 20);
  program.datasets[4].number = 99;
  CHECK_THROWS_AS(program.validate(), Error);
}
