#include "ctune/records.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

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

std::string trim(const std::string& text) {
  size_t begin = text.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  size_t end = text.find_last_not_of(" \t");
  return text.substr(begin, end - begin + 1);
}

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string token;
  for (char c : text) {
    if (c == sep) {
      out.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  out.push_back(token);
  return out;
}

bool parse_bool01(const std::string& text) {
  if (text == "1") return true;
  if (text == "0") return false;
  raise(errc::bad_value, "expected 0 or 1, got: " + text);
}

bool is_md5(const std::string& text) {
  if (text.size() != 32) return false;
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// FlagCombination
// ---------------------------------------------------------------------------

std::string FlagCombination::canonical() const {
  std::string out = base_level;
  for (const auto& flag : flags) {
    if (!out.empty()) out += ' ';
    out += flag;
  }
  return out;
}

std::string FlagCombination::platform_canonical() const {
  std::string out;
  for (const auto& flag : platform_flags) {
    if (!out.empty()) out += ' ';
    out += flag;
  }
  return out;
}

bool FlagCombination::contains(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

void FlagCombination::validate() const {
  std::set<std::string> seen(flags.begin(), flags.end());
  if (seen.size() != flags.size()) raise(errc::bad_value, "duplicate optimization flag");
  for (const auto& flag : platform_flags) {
    if (seen.count(flag)) raise(errc::bad_value, "platform flag duplicates optimization flag: " + flag);
  }
  std::set<std::string> pseen(platform_flags.begin(), platform_flags.end());
  if (pseen.size() != platform_flags.size()) raise(errc::bad_value, "duplicate platform flag");
}

FlagCombination FlagCombination::parse(const std::string& opt_flags,
                                       const std::string& opt_flags_platform) {
  FlagCombination combo;
  std::vector<std::string> tokens = split_ws(opt_flags);
  size_t start = 0;
  if (!tokens.empty() && tokens[0].rfind("-O", 0) == 0) {
    combo.base_level = tokens[0];
    start = 1;
  }
  combo.flags.assign(tokens.begin() + start, tokens.end());
  combo.platform_flags = split_ws(opt_flags_platform);
  combo.validate();
  return combo;
}

// ---------------------------------------------------------------------------
// ProgramDescriptor
// ---------------------------------------------------------------------------

const DatasetEntry& ProgramDescriptor::dataset(int number) const {
  for (const auto& entry : datasets) {
    if (entry.number == number) return entry;
  }
  raise(errc::bad_value, "unknown dataset number " + std::to_string(number) + " for " + name);
}

void ProgramDescriptor::validate() const {
  if (name.empty()) raise(errc::bad_value, "program name empty");
  for (size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].number != static_cast<int>(i) + 1) {
      raise(errc::bad_value, "dataset numbers must be 1.." + std::to_string(datasets.size()) +
                                 " with no gaps");
    }
    if (datasets[i].loop_wrapper_bound <= 0) raise(errc::bad_value, "loop wrapper bound must be positive");
  }
}

// ---------------------------------------------------------------------------
// FeatureVector
// ---------------------------------------------------------------------------

const double* FeatureVector::find(const std::string& index) const {
  for (const auto& [name, value] : entries) {
    if (name == index) return &value;
  }
  return nullptr;
}

void FeatureVector::set(const std::string& index, double value) {
  for (auto& [name, existing] : entries) {
    if (name == index) {
      existing = value;
      return;
    }
  }
  entries.emplace_back(index, value);
}

std::string FeatureVector::serialize_entries() const {
  std::string out;
  for (const auto& [name, value] : entries) {
    if (!out.empty()) out += ", ";
    out += name;
    out += '=';
    out += format_float(value);
  }
  return out;
}

std::vector<std::pair<std::string, double>> FeatureVector::parse_entries(const std::string& text) {
  std::vector<std::pair<std::string, double>> entries;
  std::set<std::string> seen;
  for (const auto& raw : split_on(text, ',')) {
    std::string token = trim(raw);
    if (token.empty() || token == "...") continue;
    size_t eq = token.find('=');
    if (eq == std::string::npos) raise(errc::bad_value, "feature entry without '=': " + token);
    std::string name = trim(token.substr(0, eq));
    if (name.empty()) raise(errc::bad_value, "feature entry with empty index: " + token);
    if (!seen.insert(name).second) raise(errc::duplicate_key, "feature index " + name);
    entries.emplace_back(name, parse_float(trim(token.substr(eq + 1))));
  }
  return entries;
}

Packet FeatureRecord::to_packet() const {
  Packet packet;
  packet.add("COMPILE_ID", compile_id.str());
  if (!function_name.empty()) packet.add("FUNCTION_NAME", function_name);
  if (!vector.anchor_pass.empty()) packet.add("PASS", vector.anchor_pass);
  packet.add("STATIC_FEATURE_VECTOR", vector.serialize_entries());
  if (feature_id.valid()) packet.add("FEATURE_ID", feature_id.str());
  return packet;
}

FeatureRecord FeatureRecord::from_packet(const Packet& packet) {
  FeatureRecord record;
  record.compile_id = EntityId::parse(packet.get("COMPILE_ID"));
  if (const auto* name = packet.find("FUNCTION_NAME")) record.function_name = *name;
  if (const auto* pass = packet.find("PASS")) record.vector.anchor_pass = *pass;
  if (const auto* id = packet.find("FEATURE_ID")) record.feature_id = EntityId::parse(*id);
  record.vector.kind = FeatureKind::static_features;
  record.vector.entries = FeatureVector::parse_entries(packet.get("STATIC_FEATURE_VECTOR"));
  return record;
}

// ---------------------------------------------------------------------------
// CompilationRecord
// ---------------------------------------------------------------------------

void CompilationRecord::validate() const {
  if (compile_time < 0) raise(errc::bad_value, "compile_time must be >= 0");
  if (!obj_md5.empty() && !is_md5(obj_md5)) {
    raise(errc::bad_value, "obj_md5 must be 32 lowercase hex chars or empty");
  }
  if (obj_md5.empty() && bin_size != 0) {
    raise(errc::bad_value, "successful compilation must carry obj_md5");
  }
  opt.validate();
}

Packet CompilationRecord::to_packet() const {
  Packet packet;
  packet.add("COMPILE_ID", compile_id.str());
  packet.add("PLATFORM_ID", platform_id.str());
  packet.add("ENVIRONMENT_ID", environment_id.str());
  packet.add("COMPILER_ID", compiler_id.str());
  packet.add("PROGRAM_ID", program_id.str());
  if (!date.empty()) packet.add("DATE", date);
  if (!time.empty()) packet.add("TIME", time);
  packet.add("OPT_FLAGS", opt.canonical());
  if (!opt.platform_flags.empty()) packet.add("OPT_FLAGS_PLATFORM", opt.platform_canonical());
  packet.add("COMPILE_TIME", format_float(compile_time));
  packet.add("BIN_SIZE", std::to_string(bin_size));
  packet.add("OBJ_MD5CRC", obj_md5);
  for (const auto& [key, value] : extensions) packet.add(key, value);
  if (!notes.empty()) packet.add("NOTES", notes);
  return packet;
}

CompilationRecord CompilationRecord::from_packet(const Packet& packet) {
  CompilationRecord record;
  std::string opt_flags, opt_platform;
  for (const auto& [key, value] : packet.fields()) {
    if (key == "COMPILE_ID") record.compile_id = EntityId::parse(value);
    else if (key == "PLATFORM_ID") record.platform_id = EntityId::parse(value);
    else if (key == "ENVIRONMENT_ID") record.environment_id = EntityId::parse(value);
    else if (key == "COMPILER_ID") record.compiler_id = EntityId::parse(value);
    else if (key == "PROGRAM_ID") record.program_id = EntityId::parse(value);
    else if (key == "DATE") record.date = value;
    else if (key == "TIME") record.time = value;
    else if (key == "OPT_FLAGS") opt_flags = value;
    else if (key == "OPT_FLAGS_PLATFORM") opt_platform = value;
    else if (key == "COMPILE_TIME") record.compile_time = parse_float(value);
    else if (key == "BIN_SIZE") record.bin_size = parse_uint(value);
    else if (key == "OBJ_MD5CRC") record.obj_md5 = value;
    else if (key == "NOTES") record.notes = value;
    else record.extensions.emplace_back(key, value);
  }
  if (!record.compile_id.valid()) raise(errc::missing_required_key, "COMPILE_ID");
  record.opt = FlagCombination::parse(opt_flags, opt_platform);
  return record;
}

// ---------------------------------------------------------------------------
// ExecutionRecord
// ---------------------------------------------------------------------------

namespace {

std::string serialize_profile(const std::vector<std::pair<std::string, ProfileEntry>>& profile) {
  std::string out;
  for (const auto& [name, entry] : profile) {
    if (!out.empty()) out += ',';
    out += '{';
    out += name;
    out += '=';
    out += format_float(entry.seconds);
    out += ',';
    out += std::to_string(entry.calls);
    out += ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10f", entry.fraction);
    out += buf;
    out += '}';
  }
  return out;
}

std::vector<std::pair<std::string, ProfileEntry>> parse_profile(const std::string& text) {
  std::vector<std::pair<std::string, ProfileEntry>> profile;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t open = text.find('{', pos);
    if (open == std::string::npos) break;
    size_t close = text.find('}', open);
    if (close == std::string::npos) raise(errc::bad_value, "unterminated profile group: " + text);
    std::string group = text.substr(open + 1, close - open - 1);
    pos = close + 1;
    size_t eq = group.find('=');
    if (eq == std::string::npos) raise(errc::bad_value, "profile group without '=': " + group);
    std::string name = trim(group.substr(0, eq));
    std::vector<std::string> values = split_on(group.substr(eq + 1), ',');
    ProfileEntry entry;
    if (!values.empty()) entry.seconds = parse_float(trim(values[0]));
    if (values.size() > 1) entry.calls = parse_int(trim(values[1]));
    if (values.size() > 2) entry.fraction = parse_float(trim(values[2]));
    profile.emplace_back(name, entry);
  }
  return profile;
}

std::string serialize_counters(const std::vector<std::pair<std::string, long long>>& counters) {
  std::string out;
  for (const auto& [name, value] : counters) {
    if (!out.empty()) out += ',';
    out += name;
    out += '=';
    out += std::to_string(value);
  }
  return out;
}

std::vector<std::pair<std::string, long long>> parse_counters(const std::string& text) {
  std::vector<std::pair<std::string, long long>> counters;
  for (const auto& raw : split_on(text, ',')) {
    std::string token = trim(raw);
    if (token.empty() || token == "...") continue;
    size_t eq = token.find('=');
    if (eq == std::string::npos) raise(errc::bad_value, "counter without '=': " + token);
    counters.emplace_back(trim(token.substr(0, eq)), parse_int(trim(token.substr(eq + 1))));
  }
  return counters;
}

}  // namespace

std::vector<double> ExecutionRecord::repeat_times() const {
  std::vector<double> times;
  for (int i = 1;; ++i) {
    std::string key = "RUN_TIME" + std::to_string(i);
    const std::string* value = nullptr;
    for (const auto& [k, v] : extensions) {
      if (k == key) {
        value = &v;
        break;
      }
    }
    if (!value) break;
    times.push_back(parse_float(*value));
  }
  if (times.empty()) times.push_back(run_time);
  return times;
}

void ExecutionRecord::validate() const {
  if (run_time < 0 || run_time_user < 0 || run_time_sys < 0) {
    raise(errc::bad_value, "run times must be >= 0");
  }
  if (dataset_number < 1) raise(errc::bad_value, "dataset numbers are 1-based");
}

Packet ExecutionRecord::to_packet() const {
  Packet packet;
  packet.add("RUN_ID", run_id.str());
  packet.add("RUN_ID_ASSOCIATE", run_id_associate.str());
  packet.add("COMPILE_ID", compile_id.str());
  packet.add("COMPILER_ID", compiler_id.str());
  packet.add("PLATFORM_ID", platform_id.str());
  packet.add("ENVIRONMENT_ID", environment_id.str());
  packet.add("PROGRAM_ID", program_id.str());
  packet.add("DATASET_ID", std::to_string(dataset_number));
  packet.add("BIN_SIZE", std::to_string(bin_size));
  if (!run_command_line.empty()) packet.add("RUN_COMMAND_LINE", run_command_line);
  packet.add("OUTPUT_CORRECT", output_correct ? "1" : "0");
  packet.add("RUN_TIME", format_float(run_time));
  packet.add("RUN_TIME_USER", format_float(run_time_user));
  packet.add("RUN_TIME_SYS", format_float(run_time_sys));
  if (!profile.empty()) packet.add("RUN_PG", serialize_profile(profile));
  if (!hardware_counters.empty()) packet.add("RUN_HC", serialize_counters(hardware_counters));
  packet.add("PROCESSOR_NUM", std::to_string(processor_num));
  packet.add("RANK", std::to_string(rank));
  for (const auto& [key, value] : extensions) packet.add(key, value);
  if (!notes.empty()) packet.add("NOTES", notes);
  return packet;
}

ExecutionRecord ExecutionRecord::from_packet(const Packet& packet) {
  ExecutionRecord record;
  record.output_correct = true;
  for (const auto& [key, value] : packet.fields()) {
    if (key == "RUN_ID") record.run_id = EntityId::parse(value);
    else if (key == "RUN_ID_ASSOCIATE") record.run_id_associate = EntityId::parse(value);
    else if (key == "COMPILE_ID") record.compile_id = EntityId::parse(value);
    else if (key == "COMPILER_ID") record.compiler_id = EntityId::parse(value);
    else if (key == "PLATFORM_ID") record.platform_id = EntityId::parse(value);
    else if (key == "ENVIRONMENT_ID") record.environment_id = EntityId::parse(value);
    else if (key == "PROGRAM_ID") record.program_id = EntityId::parse(value);
    else if (key == "DATASET_ID") record.dataset_number = static_cast<int>(parse_int(value));
    else if (key == "BIN_SIZE") record.bin_size = parse_uint(value);
    else if (key == "RUN_COMMAND_LINE") record.run_command_line = value;
    else if (key == "OUTPUT_CORRECT") record.output_correct = parse_bool01(value);
    else if (key == "RUN_TIME") record.run_time = parse_float(value);
    else if (key == "RUN_TIME_USER") record.run_time_user = parse_float(value);
    else if (key == "RUN_TIME_SYS") record.run_time_sys = parse_float(value);
    else if (key == "RUN_PG") record.profile = parse_profile(value);
    else if (key == "RUN_HC") record.hardware_counters = parse_counters(value);
    else if (key == "PROCESSOR_NUM") record.processor_num = static_cast<int>(parse_int(value));
    else if (key == "RANK") record.rank = static_cast<int>(parse_int(value));
    else if (key == "NOTES") record.notes = value;
    else record.extensions.emplace_back(key, value);
  }
  if (!record.run_id.valid()) raise(errc::missing_required_key, "RUN_ID");
  return record;
}

// ---------------------------------------------------------------------------
// aggregation and case derivation
// ---------------------------------------------------------------------------

Aggregator aggregator_from_name(const std::string& name) {
  if (name == "min") return Aggregator::min_time;
  if (name == "median") return Aggregator::median;
  if (name == "mean") return Aggregator::mean;
  raise(errc::bad_value, "unknown aggregator: " + name);
}

const char* aggregator_name(Aggregator agg) {
  switch (agg) {
    case Aggregator::min_time: return "min";
    case Aggregator::median: return "median";
    case Aggregator::mean: return "mean";
  }
  return "median";
}

double aggregate_times(const std::vector<double>& times, Aggregator agg) {
  if (times.empty()) raise(errc::empty_input, "no times to aggregate");
  switch (agg) {
    case Aggregator::min_time:
      return *std::min_element(times.begin(), times.end());
    case Aggregator::mean: {
      double sum = 0;
      for (double t : times) sum += t;
      return sum / static_cast<double>(times.size());
    }
    case Aggregator::median: {
      std::vector<double> sorted = times;
      std::sort(sorted.begin(), sorted.end());
      size_t n = sorted.size();
      if (n % 2 == 1) return sorted[n / 2];
      return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
  }
  raise(errc::internal, "bad aggregator");
}

bool OptimizationCase::output_correct() const {
  for (const auto& exec : executions) {
    if (!exec.output_correct) return false;
  }
  return true;
}

std::vector<double> OptimizationCase::all_times() const {
  std::vector<double> times;
  for (const auto& exec : executions) {
    for (double t : exec.repeat_times()) times.push_back(t);
  }
  return times;
}

double OptimizationCase::dispersion() const {
  std::vector<double> times = all_times();
  if (times.size() < 2) return 0.0;
  double lo = *std::min_element(times.begin(), times.end());
  double hi = *std::max_element(times.begin(), times.end());
  double mid = aggregate_times(times, Aggregator::median);
  if (mid == 0.0) return hi == lo ? 0.0 : std::numeric_limits<double>::infinity();
  return (hi - lo) / mid;
}

Packet OptimizationCase::summary_packet() const {
  Packet packet;
  packet.add("COMPILE_ID", compilation.compile_id.str());
  if (!executions.empty()) packet.add("RUN_ID", executions.front().run_id.str());
  packet.add("PROGRAM_ID", compilation.program_id.str());
  packet.add("COMPILER_ID", compilation.compiler_id.str());
  packet.add("PLATFORM_ID", compilation.platform_id.str());
  if (!executions.empty()) {
    packet.add("DATASET_ID", std::to_string(executions.front().dataset_number));
  }
  packet.add("OPT_FLAGS", compilation.opt.canonical());
  if (!compilation.opt.platform_flags.empty()) {
    packet.add("OPT_FLAGS_PLATFORM", compilation.opt.platform_canonical());
  }
  packet.add("BIN_SIZE", std::to_string(compilation.bin_size));
  packet.add("SPEEDUP", format_float(speedup));
  packet.add("SIZE_RATIO", format_float(size_ratio));
  packet.add("COMPILE_TIME_RATIO", format_float(compile_time_ratio));
  packet.add("DISPERSION", format_float(dispersion()));
  packet.add("OUTPUT_CORRECT", output_correct() ? "1" : "0");
  packet.add("RANK", std::to_string(rank));
  packet.add("BASELINE_RUN_ID", baseline_run_id.str());
  return packet;
}

OptimizationCase derive_case(const CompilationRecord& compilation,
                             const std::vector<ExecutionRecord>& executions,
                             const std::vector<ExecutionRecord>& baseline_executions,
                             const CompilationRecord& baseline_compilation,
                             Aggregator agg) {
  if (executions.empty()) raise(errc::empty_input, "case has no executions");
  if (baseline_executions.empty()) raise(errc::empty_input, "baseline has no executions");

  const EntityId baseline_run = baseline_executions.front().run_id;
  const int dataset = baseline_executions.front().dataset_number;
  for (const auto& exec : executions) {
    if (exec.run_id_associate != baseline_run) {
      raise(errc::dataset_mismatch,
            "execution " + exec.run_id.str() + " is not associated with baseline run " +
                baseline_run.str());
    }
    if (exec.dataset_number != dataset) {
      raise(errc::dataset_mismatch, "execution dataset differs from baseline dataset");
    }
    if (!exec.output_correct) raise(errc::incorrect_output, "execution " + exec.run_id.str());
  }
  for (const auto& exec : baseline_executions) {
    if (exec.dataset_number != dataset) raise(errc::dataset_mismatch, "baseline datasets differ");
    if (!exec.output_correct) raise(errc::incorrect_output, "baseline run " + exec.run_id.str());
  }

  std::vector<double> case_times;
  for (const auto& exec : executions) {
    for (double t : exec.repeat_times()) case_times.push_back(t);
  }
  std::vector<double> baseline_times;
  for (const auto& exec : baseline_executions) {
    for (double t : exec.repeat_times()) baseline_times.push_back(t);
  }

  const double case_agg = aggregate_times(case_times, agg);
  const double baseline_agg = aggregate_times(baseline_times, agg);
  if (case_agg == 0.0 || baseline_agg == 0.0) raise(errc::zero_time, "aggregate time is zero");
  if (compilation.bin_size == 0 || baseline_compilation.bin_size == 0) {
    raise(errc::zero_time, "binary size is zero");
  }
  if (compilation.compile_time == 0.0 || baseline_compilation.compile_time == 0.0) {
    raise(errc::zero_time, "compile time is zero");
  }

  OptimizationCase result;
  result.compilation = compilation;
  result.executions = executions;
  result.baseline_compile_id = baseline_compilation.compile_id;
  result.baseline_run_id = baseline_run;
  result.speedup = baseline_agg / case_agg;
  result.size_ratio = static_cast<double>(baseline_compilation.bin_size) /
                      static_cast<double>(compilation.bin_size);
  result.compile_time_ratio = baseline_compilation.compile_time / compilation.compile_time;
  result.rank = executions.front().rank;
  return result;
}

}  // namespace ctune
