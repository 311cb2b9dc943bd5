#include "ctune/driver.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>

#include "ctune/error.hpp"

namespace ctune {

namespace {

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  for (char c : text) {
    if (c == ' ' || c == '\t') {
      if (!token.empty()) out.push_back(std::move(token));
      token.clear();
    } else {
      token += c;
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

}  // namespace

std::string today_date() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d", &tm);
  return buf;
}

std::string now_time() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof(buf), "%H:%M:%S", &tm);
  return buf;
}

DriverEnv DriverEnv::from_environment() {
  DriverEnv env;
  if (const char* v = std::getenv("CCC_RUNS")) env.runs = std::max(1, atoi(v));
  if (const char* v = std::getenv("CCC_OPT_PLATFORM")) env.platform_flags = split_ws(v);
  if (const char* v = std::getenv("CCC_PROCESSOR_NUM"); v && *v) env.processor_num = atoi(v);
  if (const char* v = std::getenv("CCC_NOTES")) env.notes = v;
  if (const char* v = std::getenv("CCC_RUN_RE")) env.run_re = v;
  if (const char* v = std::getenv("CCC_LOOP_WRAPPER"); v && *v) env.loop_wrapper = atol(v);
  if (const char* v = std::getenv("CTUNE_COUNTERS_HOOK")) env.counters_hook = v;
  if (const char* v = std::getenv("ICI_PROG_FEAT_PASS")) env.feature_pass = v;

  // pass-through control variables map onto their record fields
  static const std::pair<const char*, const char*> comp_fields[] = {
      {"CCC_ICI_PASSES_USE", "ICI_PASSES_USE"},
      {"CCC_ICI_FEATURES_STATIC_EXTRACT", "ICI_FEATURES_STATIC_EXTRACT"},
      {"CCC_OPT_FINE", "OPT_FINE"},
      {"CCC_OPT_PAR_STATIC", "OPT_PAR_STATIC"},
  };
  for (const auto& [var, field] : comp_fields) {
    if (const char* v = std::getenv(var)) env.compilation_extensions.emplace_back(field, v);
  }
  static const std::pair<const char*, const char*> exec_fields[] = {
      {"CCC_RUN_POWER", "RUN_POWER"},
      {"CCC_RUN_ENERGY", "RUN_ENERGY"},
      {"CCC_PAR_DYNAMIC", "PAR_DYNAMIC"},
  };
  for (const auto& [var, field] : exec_fields) {
    if (const char* v = std::getenv(var)) env.execution_extensions.emplace_back(field, v);
  }
  // accepted-only variables are kept in the notes, never interpreted
  static const char* accepted[] = {"CCC_ICI_PASSES_RECORD", "CCC_HC_PAPI_USE", "CCC_GPROF",
                                   "CCC_OPROF", "CCC_OPROF_PARAM", "CCC_ARCH_CFG",
                                   "CCC_ARCH_SIZE"};
  for (const char* var : accepted) {
    if (const char* v = std::getenv(var); v && *v) {
      if (!env.notes.empty()) env.notes += "; ";
      env.notes += std::string(var) + "=" + v;
    }
  }
  return env;
}

ExperimentIds register_experiment_entities(Repository& repo, const PlatformDescriptor& platform,
                                           const PlatformDescriptor& environment,
                                           const CompilerDescriptor& compiler,
                                           const ProgramDescriptor& program, IdGenerator& idgen) {
  ExperimentIds ids;
  ids.platform = repo.register_platform(platform, idgen, EntityKind::platform);
  ids.environment = repo.register_platform(environment, idgen, EntityKind::environment);
  ids.compiler = repo.register_compiler(compiler, idgen);
  ids.program = repo.register_program(program, idgen);
  return ids;
}

std::pair<CompilationRecord, CompileOutcome> compile_program(ExperimentContext& ctx,
                                                             const ProgramDescriptor& program,
                                                             FlagCombination flags) {
  for (const auto& flag : ctx.env.platform_flags) {
    if (!flags.contains(flag) &&
        std::find(flags.platform_flags.begin(), flags.platform_flags.end(), flag) ==
            flags.platform_flags.end()) {
      flags.platform_flags.push_back(flag);
    }
  }
  flags.validate();

  CompileOutcome outcome = ctx.backend.compile(program, flags, ctx.env);
  if (!outcome.success) {
    raise(errc::compile_failed, ctx.backend.name() + " failed on " + program.name + ":\n" +
                                    outcome.log);
  }

  CompilationRecord record;
  record.compile_id = ctx.idgen.next();
  record.platform_id = ctx.ids.platform;
  record.environment_id = ctx.ids.environment;
  record.compiler_id = ctx.ids.compiler;
  record.program_id = ctx.ids.program;
  record.opt = flags;
  record.compile_time = outcome.compile_time;
  record.bin_size = outcome.bin_size;
  record.obj_md5 = outcome.obj_md5;
  record.date = ctx.env.date.empty() ? today_date() : ctx.env.date;
  record.time = ctx.env.time.empty() ? now_time() : ctx.env.time;
  record.notes = ctx.env.notes;
  record.extensions = ctx.env.compilation_extensions;
  if (outcome.features && !ctx.env.feature_pass.empty()) {
    outcome.features->anchor_pass = ctx.env.feature_pass;
  }
  record.validate();
  return {std::move(record), std::move(outcome)};
}

std::pair<ExecutionRecord, RunOutcome> run_program(ExperimentContext& ctx,
                                                   const ProgramDescriptor& program,
                                                   const CompilationRecord& compilation,
                                                   const FlagCombination& flags,
                                                   int dataset_number, int repeats,
                                                   bool is_baseline, const RunOutputs* reference,
                                                   const EntityId& baseline_run_id) {
  if (!ctx.env.run_re.empty() && ctx.env.run_re != "native") {
    raise(errc::unsupported_runtime, "runtime environment " + ctx.env.run_re +
                                         " is accepted but not supported; only native execution");
  }
  if (dataset_number < 1) raise(errc::bad_value, "dataset numbers are 1-based");
  if (!is_baseline && !reference) {
    raise(errc::missing_reference,
          "non-baseline run without stored reference outputs (run the baseline first)");
  }

  RunOutcome outcome = ctx.backend.run(program, flags, dataset_number, repeats, ctx.env,
                                       is_baseline ? nullptr : reference);

  ExecutionRecord record;
  record.run_id = ctx.idgen.next();
  record.run_id_associate = is_baseline ? record.run_id : baseline_run_id;
  if (!record.run_id_associate.valid()) {
    raise(errc::missing_reference, "non-baseline run without a baseline run id");
  }
  record.compile_id = compilation.compile_id;
  record.compiler_id = compilation.compiler_id;
  record.program_id = compilation.program_id;
  record.platform_id = compilation.platform_id;
  record.environment_id = compilation.environment_id;
  record.dataset_number = dataset_number;
  record.bin_size = compilation.bin_size;
  record.output_correct = outcome.output_correct;

  std::vector<double> walls, users, syss;
  for (const auto& timing : outcome.times) {
    walls.push_back(timing.wall);
    users.push_back(timing.user);
    syss.push_back(timing.sys);
  }
  record.run_time = aggregate_times(walls, ctx.env.aggregator);
  record.run_time_user = aggregate_times(users, ctx.env.aggregator);
  record.run_time_sys = aggregate_times(syss, ctx.env.aggregator);
  if (walls.size() > 1) {
    for (size_t i = 0; i < walls.size(); ++i) {
      record.extensions.emplace_back("RUN_TIME" + std::to_string(i + 1), format_float(walls[i]));
    }
  }
  record.extensions.emplace_back("DATE", ctx.env.date.empty() ? today_date() : ctx.env.date);
  record.extensions.emplace_back("TIME", ctx.env.time.empty() ? now_time() : ctx.env.time);
  for (const auto& extension : ctx.env.execution_extensions) {
    record.extensions.push_back(extension);
  }

  record.run_command_line = program.datasets.empty()
                                ? ""
                                : program.dataset(dataset_number).command_line;
  record.profile = outcome.profile;
  record.hardware_counters = outcome.hardware_counters;
  record.processor_num = ctx.env.processor_num < 0 ? 0 : ctx.env.processor_num;
  record.notes = ctx.env.notes;
  if (outcome.noise_seed != 0) {
    if (!record.notes.empty()) record.notes += "; ";
    record.notes += "noise_seed=" + std::to_string(outcome.noise_seed);
  }
  record.validate();
  return {std::move(record), std::move(outcome)};
}

std::optional<ExecutionRecord> skip_if_unchanged(const Repository& repo, const std::string& obj_md5,
                                                 const EntityId& program_id, int dataset_number) {
  if (obj_md5.empty()) return std::nullopt;
  for (const auto& comp : repo.compilations()) {
    if (comp.obj_md5 != obj_md5 || comp.program_id != program_id) continue;
    for (const auto* exec : repo.executions_for_compile(comp.compile_id)) {
      if (exec->dataset_number == dataset_number) return *exec;
    }
  }
  return std::nullopt;
}

}  // namespace ctune
