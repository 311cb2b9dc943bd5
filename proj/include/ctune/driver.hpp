#pragma once

#include <optional>

#include "ctune/backend.hpp"
#include "ctune/records.hpp"
#include "ctune/repository.hpp"

namespace ctune {

struct ExperimentIds {
  EntityId platform;
  EntityId environment;
  EntityId compiler;
  EntityId program;
};

// Everything one compile/run/explore session needs.
struct ExperimentContext {
  Backend& backend;
  Repository& repo;
  ExperimentIds ids;
  DriverEnv env;
  IdGenerator idgen;
};

// Registers platform/environment/compiler/program entities (deduplicated by
// content) and returns their ids.
ExperimentIds register_experiment_entities(Repository& repo, const PlatformDescriptor& platform,
                                           const PlatformDescriptor& environment,
                                           const CompilerDescriptor& compiler,
                                           const ProgramDescriptor& program, IdGenerator& idgen);

// ccc-comp: auxiliary platform flags from the environment are folded into the
// record's platform flag list, never into the searched flags.
std::pair<CompilationRecord, CompileOutcome> compile_program(ExperimentContext& ctx,
                                                             const ProgramDescriptor& program,
                                                             FlagCombination flags);

// ccc-run: a baseline run captures reference outputs; any other run needs a
// reference and validates against it. Repeats are folded into one record
// (RUN_TIME aggregated, per-repeat walls in RUN_TIME1..N).
std::pair<ExecutionRecord, RunOutcome> run_program(ExperimentContext& ctx,
                                                   const ProgramDescriptor& program,
                                                   const CompilationRecord& compilation,
                                                   const FlagCombination& flags,
                                                   int dataset_number, int repeats,
                                                   bool is_baseline, const RunOutputs* reference,
                                                   const EntityId& baseline_run_id = {});

// Returns the prior execution for an identical obj_md5/program/dataset
// triple, so unchanged code is never re-run.
std::optional<ExecutionRecord> skip_if_unchanged(const Repository& repo, const std::string& obj_md5,
                                                 const EntityId& program_id, int dataset_number);

std::string today_date();
std::string now_time();

}  // namespace ctune
