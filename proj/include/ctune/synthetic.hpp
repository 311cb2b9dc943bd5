#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctune/backend.hpp"
#include "ctune/records.hpp"

namespace ctune {

// Deterministic analytic stand-in for a real benchmark: run time is
// base_time scaled by the multipliers of the active flags, any interaction
// whose flag set is fully active, the dataset modifier, and an optional
// seeded gaussian noise term.
struct SyntheticProgram {
  EntityId id;
  std::string name;
  double base_time = 1.0;
  uint64_t base_size = 1;
  double base_compile_time = 1.0;
  std::map<std::string, std::pair<double, double>> flag_effects;  // flag -> (time x, size x)
  std::vector<std::pair<std::vector<std::string>, double>> interactions;
  FeatureVector features;
  double noise_sigma = 0.0;     // relative
  std::map<int, double> dataset_modifiers;  // default 1.0
  int dataset_count = 1;
  std::vector<std::string> breaking_flags;  // flags that miscompile the output

  void validate() const;

  // Closed-form products over active flags (base level participates when it
  // has an effect entry). No noise, no dataset modifier.
  double time_multiplier(const FlagCombination& flags) const;
  double size_multiplier(const FlagCombination& flags) const;
  double dataset_modifier(int dataset_number) const;

  double compile_time_for(const FlagCombination& flags) const;
  uint64_t size_for(const FlagCombination& flags) const;
  // Noise-free run time for one invocation.
  double time_for(const FlagCombination& flags, int dataset_number) const;

  // Canonical identity of the generated "binary": flag sets with identical
  // effect collide deliberately, mirroring OBJ_MD5CRC semantics.
  std::string object_identity(const FlagCombination& flags) const;

  ProgramDescriptor descriptor() const;

  Packet to_packet() const;
  static SyntheticProgram from_packet(const Packet& packet);
};

// SPROG packet stream (one packet per program).
std::vector<SyntheticProgram> load_synthetic_programs(const std::filesystem::path& path);
std::vector<SyntheticProgram> parse_synthetic_programs(const std::string& text);

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(std::vector<SyntheticProgram> programs);
  static SyntheticBackend from_file(const std::filesystem::path& path);

  std::string name() const override { return "synthetic"; }
  CompileOutcome compile(const ProgramDescriptor& program, const FlagCombination& flags,
                         const DriverEnv& env) override;
  RunOutcome run(const ProgramDescriptor& program, const FlagCombination& flags,
                 int dataset_number, int repeats, const DriverEnv& env,
                 const RunOutputs* reference) override;

  const std::vector<SyntheticProgram>& programs() const { return programs_; }
  const SyntheticProgram& program(const EntityId& id) const;

 private:
  std::vector<SyntheticProgram> programs_;
};

}  // namespace ctune
