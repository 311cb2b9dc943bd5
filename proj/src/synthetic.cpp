#include "ctune/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ctune/error.hpp"
#include "ctune/md5.hpp"
#include "ctune/rng.hpp"

namespace ctune {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string token;
  for (char c : text) {
    if (c == sep) {
      if (!token.empty()) out.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  if (!token.empty()) out.push_back(token);
  return out;
}

// Active multiplier lookup covers the base level and the searched flags;
// platform flags never change the surrogate outcome.
std::vector<std::string> active_tokens(const FlagCombination& flags) {
  std::vector<std::string> active;
  if (!flags.base_level.empty()) active.push_back(flags.base_level);
  active.insert(active.end(), flags.flags.begin(), flags.flags.end());
  return active;
}

}  // namespace

void SyntheticProgram::validate() const {
  if (base_time <= 0) raise(errc::bad_value, "base_time must be positive");
  if (base_size == 0) raise(errc::bad_value, "base_size must be positive");
  if (noise_sigma < 0) raise(errc::bad_value, "noise_sigma must be >= 0");
  if (dataset_count < 1) raise(errc::bad_value, "dataset_count must be >= 1");
  for (const auto& [flag, effect] : flag_effects) {
    if (effect.first <= 0 || effect.second <= 0) {
      raise(errc::bad_value, "multipliers must be positive: " + flag);
    }
  }
  for (const auto& [set, mult] : interactions) {
    if (mult <= 0) raise(errc::bad_value, "interaction multiplier must be positive");
    if (set.size() < 2) raise(errc::bad_value, "interaction needs at least two flags");
  }
}

double SyntheticProgram::time_multiplier(const FlagCombination& flags) const {
  double mult = 1.0;
  const std::vector<std::string> active = active_tokens(flags);
  for (const auto& token : active) {
    auto it = flag_effects.find(token);
    if (it != flag_effects.end()) mult *= it->second.first;
  }
  const std::set<std::string> active_set(active.begin(), active.end());
  for (const auto& [set, extra] : interactions) {
    bool subset = true;
    for (const auto& flag : set) {
      if (!active_set.count(flag)) subset = false;
    }
    if (subset) mult *= extra;
  }
  return mult;
}

double SyntheticProgram::size_multiplier(const FlagCombination& flags) const {
  double mult = 1.0;
  for (const auto& token : active_tokens(flags)) {
    auto it = flag_effects.find(token);
    if (it != flag_effects.end()) mult *= it->second.second;
  }
  return mult;
}

double SyntheticProgram::dataset_modifier(int dataset_number) const {
  auto it = dataset_modifiers.find(dataset_number);
  return it == dataset_modifiers.end() ? 1.0 : it->second;
}

double SyntheticProgram::compile_time_for(const FlagCombination& flags) const {
  return base_compile_time * (1.0 + 0.01 * static_cast<double>(flags.flags.size()));
}

uint64_t SyntheticProgram::size_for(const FlagCombination& flags) const {
  double size = static_cast<double>(base_size) * size_multiplier(flags);
  return static_cast<uint64_t>(std::llround(size));
}

double SyntheticProgram::time_for(const FlagCombination& flags, int dataset_number) const {
  return base_time * time_multiplier(flags) * dataset_modifier(dataset_number);
}

std::string SyntheticProgram::object_identity(const FlagCombination& flags) const {
  // Hash of the canonical flag form after dropping no-effect flags: a flag
  // is kept only if removing it changes the produced code (time or size
  // product, or output-breaking behavior).
  FlagCombination effective;
  effective.base_level = flags.base_level;
  const double full_time = time_multiplier(flags);
  const double full_size = size_multiplier(flags);
  for (const auto& flag : flags.flags) {
    FlagCombination without = flags;
    without.flags.erase(std::find(without.flags.begin(), without.flags.end(), flag));
    const bool breaking =
        std::find(breaking_flags.begin(), breaking_flags.end(), flag) != breaking_flags.end();
    if (breaking || time_multiplier(without) != full_time ||
        size_multiplier(without) != full_size) {
      effective.flags.push_back(flag);
    }
  }
  return md5_hex(id.str() + "|" + effective.canonical());
}

ProgramDescriptor SyntheticProgram::descriptor() const {
  ProgramDescriptor descriptor;
  descriptor.id = id;
  descriptor.name = name;
  descriptor.source_dir = "";
  for (int i = 1; i <= dataset_count; ++i) {
    DatasetEntry entry;
    entry.number = i;
    entry.command_line = "dataset " + std::to_string(i);
    entry.loop_wrapper_bound = 1;
    descriptor.datasets.push_back(std::move(entry));
  }
  return descriptor;
}

Packet SyntheticProgram::to_packet() const {
  Packet packet;
  packet.add("SPROG", name);
  packet.add("PROGRAM_ID", id.str());
  packet.add("BASE_TIME", format_float(base_time));
  packet.add("BASE_SIZE", std::to_string(base_size));
  packet.add("BASE_COMPILE_TIME", format_float(base_compile_time));
  packet.add("NOISE_SIGMA", format_float(noise_sigma));
  packet.add("DATASETS", std::to_string(dataset_count));
  if (!dataset_modifiers.empty()) {
    std::string text;
    for (const auto& [n, mult] : dataset_modifiers) {
      if (!text.empty()) text += ';';
      text += std::to_string(n) + ":" + format_float(mult);
    }
    packet.add("DATASET_MODIFIERS", text);
  }
  if (!flag_effects.empty()) {
    std::string text;
    for (const auto& [flag, effect] : flag_effects) {
      if (!text.empty()) text += ';';
      text += flag + ":" + format_float(effect.first) + ":" + format_float(effect.second);
    }
    packet.add("FLAG_EFFECTS", text);
  }
  if (!interactions.empty()) {
    std::string text;
    for (const auto& [set, mult] : interactions) {
      if (!text.empty()) text += ';';
      std::string joined;
      for (const auto& flag : set) {
        if (!joined.empty()) joined += '+';
        joined += flag;
      }
      text += joined + ":" + format_float(mult);
    }
    packet.add("INTERACTIONS", text);
  }
  if (!breaking_flags.empty()) {
    std::string text;
    for (const auto& flag : breaking_flags) {
      if (!text.empty()) text += ';';
      text += flag;
    }
    packet.add("BREAKING_FLAGS", text);
  }
  if (!features.empty()) packet.add("STATIC_FEATURE_VECTOR", features.serialize_entries());
  return packet;
}

SyntheticProgram SyntheticProgram::from_packet(const Packet& packet) {
  SyntheticProgram program;
  program.name = packet.get("SPROG");
  if (program.name.empty()) raise(errc::bad_value, "SPROG name empty");
  if (const auto* id = packet.find("PROGRAM_ID"); id && !id->empty()) {
    program.id = EntityId::parse(*id);
  } else {
    // stable fallback id derived from the name
    const std::string digest = md5_hex("sprog:" + program.name);
    EntityId::u128 value = 0;
    for (char c : digest) {
      value = value * 16 + (c <= '9' ? c - '0' : c - 'a' + 10);
    }
    if (value == 0) value = 1;
    program.id = EntityId(value);
  }
  if (const auto* v = packet.find("BASE_TIME")) program.base_time = parse_float(*v);
  if (const auto* v = packet.find("BASE_SIZE")) program.base_size = parse_uint(*v);
  if (const auto* v = packet.find("BASE_COMPILE_TIME")) program.base_compile_time = parse_float(*v);
  if (const auto* v = packet.find("NOISE_SIGMA")) program.noise_sigma = parse_float(*v);
  if (const auto* v = packet.find("DATASETS")) program.dataset_count = static_cast<int>(parse_int(*v));
  if (const auto* v = packet.find("DATASET_MODIFIERS")) {
    for (const auto& part : split(*v, ';')) {
      auto bits = split(part, ':');
      if (bits.size() != 2) raise(errc::bad_value, "dataset modifier: " + part);
      program.dataset_modifiers[static_cast<int>(parse_int(bits[0]))] = parse_float(bits[1]);
    }
  }
  if (const auto* v = packet.find("FLAG_EFFECTS")) {
    for (const auto& part : split(*v, ';')) {
      auto colon2 = part.rfind(':');
      auto colon1 = colon2 == std::string::npos ? std::string::npos : part.rfind(':', colon2 - 1);
      if (colon1 == std::string::npos) raise(errc::bad_value, "flag effect: " + part);
      const std::string flag = part.substr(0, colon1);
      program.flag_effects[flag] = {parse_float(part.substr(colon1 + 1, colon2 - colon1 - 1)),
                                    parse_float(part.substr(colon2 + 1))};
    }
  }
  if (const auto* v = packet.find("INTERACTIONS")) {
    for (const auto& part : split(*v, ';')) {
      auto colon = part.rfind(':');
      if (colon == std::string::npos) raise(errc::bad_value, "interaction: " + part);
      program.interactions.emplace_back(split(part.substr(0, colon), '+'),
                                        parse_float(part.substr(colon + 1)));
    }
  }
  if (const auto* v = packet.find("BREAKING_FLAGS")) program.breaking_flags = split(*v, ';');
  if (const auto* v = packet.find("STATIC_FEATURE_VECTOR")) {
    program.features.kind = FeatureKind::static_features;
    program.features.entries = FeatureVector::parse_entries(*v);
  }
  program.validate();
  return program;
}

std::vector<SyntheticProgram> parse_synthetic_programs(const std::string& text) {
  std::vector<SyntheticProgram> programs;
  for (const auto& packet : parse_packet_stream(text)) {
    if (packet.empty()) continue;
    programs.push_back(SyntheticProgram::from_packet(packet));
  }
  if (programs.empty()) raise(errc::bad_value, "no SPROG packets found");
  return programs;
}

std::vector<SyntheticProgram> load_synthetic_programs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_synthetic_programs(buf.str());
}

SyntheticBackend::SyntheticBackend(std::vector<SyntheticProgram> programs)
    : programs_(std::move(programs)) {
  for (const auto& program : programs_) program.validate();
}

SyntheticBackend SyntheticBackend::from_file(const std::filesystem::path& path) {
  return SyntheticBackend(load_synthetic_programs(path));
}

const SyntheticProgram& SyntheticBackend::program(const EntityId& id) const {
  for (const auto& program : programs_) {
    if (program.id == id) return program;
  }
  raise(errc::bad_value, "no synthetic program with id " + id.str());
}

CompileOutcome SyntheticBackend::compile(const ProgramDescriptor& descriptor,
                                         const FlagCombination& flags, const DriverEnv&) {
  const SyntheticProgram& prog = program(descriptor.id);
  CompileOutcome outcome;
  outcome.success = true;
  outcome.compile_time = prog.compile_time_for(flags);
  outcome.bin_size = prog.size_for(flags);
  outcome.obj_md5 = prog.object_identity(flags);
  outcome.features = prog.features;
  return outcome;
}

RunOutcome SyntheticBackend::run(const ProgramDescriptor& descriptor, const FlagCombination& flags,
                                 int dataset_number, int repeats, const DriverEnv& env,
                                 const RunOutputs* reference) {
  if (repeats < 1) raise(errc::bad_value, "repeats must be >= 1");
  const SyntheticProgram& prog = program(descriptor.id);
  if (dataset_number < 1 || dataset_number > prog.dataset_count) {
    raise(errc::run_failed, "dataset " + std::to_string(dataset_number) + " out of range");
  }

  const double base = prog.time_for(flags, dataset_number);
  const std::string identity = prog.object_identity(flags);
  const uint64_t stream_seed =
      hash64(std::to_string(env.seed) + "|" + identity + "|" + std::to_string(dataset_number));
  Rng rng(stream_seed);

  RunOutcome outcome;
  outcome.noise_seed = stream_seed;
  for (int i = 0; i < repeats; ++i) {
    double factor = 1.0;
    if (prog.noise_sigma > 0) {
      factor = std::max(0.01, 1.0 + prog.noise_sigma * rng.next_gaussian());
    }
    RepeatTiming timing;
    timing.wall = base * factor;
    timing.user = timing.wall * 0.9;
    timing.sys = timing.wall * 0.05;
    outcome.times.push_back(timing);
  }

  // The surrogate's output depends only on the object identity with the
  // breaking flags folded in, and on the dataset.
  std::string breaking_part;
  for (const auto& flag : prog.breaking_flags) {
    if (flags.contains(flag)) breaking_part += flag;
  }
  outcome.outputs.files.emplace_back(
      "output", md5_hex(prog.id.str() + "|" + std::to_string(dataset_number) + "|" + breaking_part));
  outcome.output_correct = reference ? outcome.outputs.matches(*reference) : true;

  outcome.hardware_counters.emplace_back(
      "SIM_CYCLES", static_cast<long long>(std::llround(base * 1e6)));
  return outcome;
}

}  // namespace ctune
