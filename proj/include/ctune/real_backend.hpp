#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ctune/backend.hpp"
#include "ctune/records.hpp"

namespace ctune {

// _ccc_info_datasets: total count, then ====-separated blocks of
// (number, command line, loop wrapper bound).
std::vector<DatasetEntry> parse_dataset_descriptor(const std::string& text);
std::vector<DatasetEntry> load_dataset_descriptor(const std::filesystem::path& path);

// Shells out to an installed compiler and executes the produced binary per
// dataset, validating outputs against the captured reference run.
class RealBackend : public Backend {
 public:
  RealBackend(CompilerDescriptor compiler, std::filesystem::path workdir);

  std::string name() const override { return compiler_.name; }
  CompileOutcome compile(const ProgramDescriptor& program, const FlagCombination& flags,
                         const DriverEnv& env) override;
  RunOutcome run(const ProgramDescriptor& program, const FlagCombination& flags,
                 int dataset_number, int repeats, const DriverEnv& env,
                 const RunOutputs* reference) override;

  std::filesystem::path binary_path(const ProgramDescriptor& program) const;

 private:
  CompilerDescriptor compiler_;
  std::filesystem::path workdir_;
};

// Template expansion: {SOURCES}, {OUTPUT}, {FLAGS} placeholders.
std::string expand_invocation(const std::string& invocation_template, const std::string& sources,
                              const std::string& output, const std::string& flags);

}  // namespace ctune
