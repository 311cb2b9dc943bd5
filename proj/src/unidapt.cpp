#include "ctune/unidapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ctune/error.hpp"
#include "ctune/filters.hpp"
#include "ctune/rng.hpp"

namespace ctune {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string serialize_phase_times(const std::map<int, double>& phase_times) {
  std::string out;
  for (const auto& [phase, seconds] : phase_times) {
    if (!out.empty()) out += ';';
    out += std::to_string(phase) + ":" + format_float(seconds);
  }
  return out;
}

std::map<int, double> parse_phase_times(const std::string& text) {
  std::map<int, double> out;
  std::string token;
  auto flush = [&out](const std::string& part) {
    if (part.empty()) return;
    const size_t colon = part.find(':');
    if (colon == std::string::npos) raise(errc::bad_value, "phase time: " + part);
    out[static_cast<int>(parse_int(part.substr(0, colon)))] = parse_float(part.substr(colon + 1));
  };
  for (char c : text) {
    if (c == ';') {
      flush(token);
      token.clear();
    } else {
      token += c;
    }
  }
  flush(token);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// program and trace definitions
// ---------------------------------------------------------------------------

double Clone::mean_time() const {
  if (phase_times.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [phase, seconds] : phase_times) sum += seconds;
  return sum / static_cast<double>(phase_times.size());
}

void AdaptiveProgram::validate() const {
  if (clones.empty()) raise(errc::bad_value, "adaptive program without clones");
  std::set<int> ids;
  for (const auto& clone : clones) {
    if (!ids.insert(clone.clone_id).second) {
      raise(errc::bad_value, "duplicate clone id " + std::to_string(clone.clone_id));
    }
    for (const auto& [phase, seconds] : clone.phase_times) {
      if (seconds <= 0) raise(errc::bad_value, "phase times must be positive");
    }
  }
  if (monitor_overhead < 0) raise(errc::bad_value, "monitor overhead must be >= 0");
}

std::vector<Packet> AdaptiveProgram::to_packets() const {
  std::vector<Packet> packets;
  Packet head;
  head.add("ADAPTIVE_PROGRAM_ID", program_id.str());
  head.add("MONITOR_OVERHEAD", format_float(monitor_overhead));
  packets.push_back(std::move(head));
  for (const auto& clone : clones) {
    Packet packet;
    packet.add("CLONE_ID", std::to_string(clone.clone_id));
    packet.add("OPT_FLAGS", clone.flags.canonical());
    packet.add("PHASE_TIMES", serialize_phase_times(clone.phase_times));
    packets.push_back(std::move(packet));
  }
  return packets;
}

AdaptiveProgram AdaptiveProgram::from_packets(const std::vector<Packet>& packets) {
  AdaptiveProgram program;
  bool seen_head = false;
  for (const auto& packet : packets) {
    if (packet.empty()) continue;
    if (packet.has("ADAPTIVE_PROGRAM_ID")) {
      program.program_id = EntityId::parse(packet.get("ADAPTIVE_PROGRAM_ID"));
      if (const auto* v = packet.find("MONITOR_OVERHEAD")) {
        program.monitor_overhead = parse_float(*v);
      }
      seen_head = true;
      continue;
    }
    if (packet.has("CLONE_ID")) {
      Clone clone;
      clone.clone_id = static_cast<int>(parse_int(packet.get("CLONE_ID")));
      if (const auto* flags = packet.find("OPT_FLAGS")) {
        clone.flags = FlagCombination::parse(*flags);
      }
      clone.phase_times = parse_phase_times(packet.get("PHASE_TIMES"));
      program.clones.push_back(std::move(clone));
    }
  }
  if (!seen_head) raise(errc::bad_value, "missing ADAPTIVE_PROGRAM_ID packet");
  program.validate();
  return program;
}

AdaptiveProgram AdaptiveProgram::load(const std::filesystem::path& path) {
  return from_packets(parse_packet_stream(read_file(path)));
}

TraceSpec TraceSpec::from_packets(const std::vector<Packet>& packets) {
  TraceSpec spec;
  for (const auto& packet : packets) {
    if (packet.empty()) continue;
    if (packet.has("TRACE_SEED")) {
      spec.seed = parse_uint(packet.get("TRACE_SEED"));
      const std::string& segments = packet.get("SEGMENTS");
      std::string token;
      auto flush = [&spec](const std::string& part) {
        if (part.empty()) return;
        const size_t colon = part.find(':');
        if (colon == std::string::npos) raise(errc::bad_value, "segment: " + part);
        spec.segments.emplace_back(static_cast<int>(parse_int(part.substr(0, colon))),
                                   parse_int(part.substr(colon + 1)));
      };
      for (char c : segments) {
        if (c == ';') {
          flush(token);
          token.clear();
        } else {
          token += c;
        }
      }
      flush(token);
      continue;
    }
    if (packet.has("PHASE_ID")) {
      const int phase = static_cast<int>(parse_int(packet.get("PHASE_ID")));
      FeatureVector features;
      features.kind = FeatureKind::dynamic_features;
      features.entries = FeatureVector::parse_entries(packet.get("FEATURES"));
      spec.phase_features[phase] = std::move(features);
      if (const auto* sigma = packet.find("FEATURE_SIGMA")) {
        spec.phase_sigma[phase] = parse_float(*sigma);
      }
    }
  }
  if (spec.segments.empty()) raise(errc::bad_value, "trace without segments");
  return spec;
}

TraceSpec TraceSpec::load(const std::filesystem::path& path) {
  return from_packets(parse_packet_stream(read_file(path)));
}

PhaseTrace PhaseTrace::generate(const TraceSpec& spec) {
  PhaseTrace trace;
  Rng rng(spec.seed);
  for (const auto& [phase, count] : spec.segments) {
    auto it = spec.phase_features.find(phase);
    if (it == spec.phase_features.end()) {
      raise(errc::bad_value, "segment references undescribed phase " + std::to_string(phase));
    }
    double sigma = 0.0;
    if (auto sit = spec.phase_sigma.find(phase); sit != spec.phase_sigma.end()) {
      sigma = sit->second;
    }
    for (long i = 0; i < count; ++i) {
      TraceStep step;
      step.phase_id = phase;
      step.features.kind = FeatureKind::dynamic_features;
      for (const auto& [index, mean] : it->second.entries) {
        double value = mean;
        if (sigma > 0) value = mean * (1.0 + sigma * rng.next_gaussian());
        step.features.entries.emplace_back(index, value);
      }
      trace.steps.push_back(std::move(step));
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// quantization
// ---------------------------------------------------------------------------

FeatureQuantizer::FeatureQuantizer(const PhaseTrace& trace, int bins) : bins_(std::max(1, bins)) {
  for (const auto& step : trace.steps) {
    for (const auto& [index, value] : step.features.entries) {
      auto it = ranges_.find(index);
      if (it == ranges_.end()) {
        ranges_[index] = {value, value};
      } else {
        it->second.first = std::min(it->second.first, value);
        it->second.second = std::max(it->second.second, value);
      }
    }
  }
}

std::string FeatureQuantizer::signature(const FeatureVector& features) const {
  std::string out;
  for (const auto& [index, range] : ranges_) {
    int bin = 0;
    const double* value = features.find(index);
    if (value && range.second > range.first) {
      const double unit = (*value - range.first) / (range.second - range.first);
      bin = std::clamp(static_cast<int>(unit * bins_), 0, bins_ - 1);
    }
    if (!out.empty()) out += '|';
    out += index + ":" + std::to_string(bin);
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

namespace {

struct SignatureState {
  std::set<int> tried;
  std::map<int, std::pair<long, double>> stats;  // clone -> (count, total time)
  long hits_since_calibration = 0;
  long evidence = 0;

  int argmin_mean() const {
    int best = -1;
    double best_mean = 0.0;
    for (const auto& [clone, stat] : stats) {
      const double mean = stat.second / static_cast<double>(stat.first);
      if (best < 0 || mean < best_mean) {
        best = clone;
        best_mean = mean;
      }
    }
    return best;
  }
};

}  // namespace

SimReport simulate(const AdaptiveProgram& program, const PhaseTrace& trace,
                   const AdaptationPolicy& policy) {
  program.validate();
  if (trace.steps.empty()) raise(errc::empty_trace, "trace has no steps");

  FeatureQuantizer quantizer(trace, policy.bins);
  std::map<std::string, SignatureState> table;

  SimReport report;
  report.steps.reserve(trace.steps.size());

  for (const auto& step : trace.steps) {
    const std::string signature = quantizer.signature(step.features);
    SignatureState& state = table[signature];

    if (policy.recalibration_interval > 0 &&
        state.hits_since_calibration >= policy.recalibration_interval) {
      state.tried.clear();  // drift check: re-sample every clone once
      state.hits_since_calibration = 0;
    }

    // round-robin over untried clones, then exploit the argmin row
    int chosen = -1;
    bool calibration = false;
    for (const auto& clone : program.clones) {
      if (!state.tried.count(clone.clone_id)) {
        chosen = clone.clone_id;
        calibration = true;
        break;
      }
    }
    if (!calibration) chosen = state.argmin_mean();

    const Clone* clone = nullptr;
    for (const auto& candidate : program.clones) {
      if (candidate.clone_id == chosen) clone = &candidate;
    }
    auto time_it = clone->phase_times.find(step.phase_id);
    if (time_it == clone->phase_times.end()) {
      raise(errc::bad_value, "clone " + std::to_string(chosen) + " has no time for phase " +
                                 std::to_string(step.phase_id));
    }
    const double observed = time_it->second;

    state.tried.insert(chosen);
    auto& stat = state.stats[chosen];
    stat.first += 1;
    stat.second += observed;
    state.hits_since_calibration += 1;
    state.evidence += 1;

    report.total_time += observed * (1.0 + program.monitor_overhead);
    StepOutcome outcome;
    outcome.phase_id = step.phase_id;
    outcome.signature = signature;
    outcome.clone_id = chosen;
    outcome.time = observed;
    outcome.calibration = calibration;
    report.steps.push_back(std::move(outcome));

    double oracle_best = 0.0;
    bool first = true;
    for (const auto& candidate : program.clones) {
      auto it = candidate.phase_times.find(step.phase_id);
      if (it == candidate.phase_times.end()) continue;
      if (first || it->second < oracle_best) {
        oracle_best = it->second;
        first = false;
      }
    }
    report.oracle_time += oracle_best;
  }

  for (const auto& [signature, state] : table) {
    TableRow row;
    row.signature = signature;
    row.best_clone = state.argmin_mean();
    row.evidence = state.evidence;
    report.table.push_back(std::move(row));
  }
  report.regret = report.oracle_time > 0 ? report.total_time / report.oracle_time - 1.0 : 0.0;
  return report;
}

std::vector<Packet> SimReport::to_packets() const {
  std::vector<Packet> packets;
  Packet head;
  head.add("STEPS", std::to_string(steps.size()));
  head.add("TOTAL_TIME", format_float(total_time));
  head.add("ORACLE_TIME", format_float(oracle_time));
  head.add("REGRET", format_float(regret));
  packets.push_back(std::move(head));
  for (const auto& row : table) {
    Packet packet;
    packet.add("SIGNATURE", row.signature);
    packet.add("BEST_CLONE", std::to_string(row.best_clone));
    packet.add("EVIDENCE", std::to_string(row.evidence));
    packets.push_back(std::move(packet));
  }
  return packets;
}

std::string SimReport::to_csv() const {
  std::string out = "step,phase,clone,time,calibration\n";
  for (size_t i = 0; i < steps.size(); ++i) {
    const StepOutcome& step = steps[i];
    out += std::to_string(i + 1) + "," + std::to_string(step.phase_id) + "," +
           std::to_string(step.clone_id) + "," + format_float(step.time) + "," +
           (step.calibration ? "1" : "0") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// clone evolution
// ---------------------------------------------------------------------------

AdaptiveProgram evolve_clones(const AdaptiveProgram& program, const Repository& repo, size_t k) {
  program.validate();
  if (k == 0) return program;

  QueryCriteria criteria;
  criteria.program_id = program.program_id;
  criteria.output_correct = true;
  std::vector<OptimizationCase> frontier = pareto_filter(repo.query(criteria));
  std::stable_sort(frontier.begin(), frontier.end(),
                   [](const OptimizationCase& a, const OptimizationCase& b) {
                     return a.speedup > b.speedup;
                   });

  std::set<std::string> in_use;
  for (const auto& clone : program.clones) in_use.insert(clone.flags.canonical());
  std::vector<const OptimizationCase*> candidates;
  for (const auto& opt_case : frontier) {
    if (!in_use.count(opt_case.compilation.opt.canonical())) candidates.push_back(&opt_case);
  }
  if (candidates.empty()) {
    raise(errc::no_candidates, "no unused frontier combinations for program " +
                                   program.program_id.str());
  }

  // worst clones by mean phase time; the original clone 0 stays
  std::vector<size_t> order;
  for (size_t i = 0; i < program.clones.size(); ++i) {
    if (program.clones[i].clone_id != 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&program](size_t a, size_t b) {
    return program.clones[a].mean_time() > program.clones[b].mean_time();
  });
  const size_t replace = std::min({k, order.size(), candidates.size()});

  const Clone* original = nullptr;
  for (const auto& clone : program.clones) {
    if (clone.clone_id == 0) original = &clone;
  }
  if (!original) raise(errc::bad_value, "adaptive program without clone 0");
  int next_id = 0;
  for (const auto& clone : program.clones) next_id = std::max(next_id, clone.clone_id);

  AdaptiveProgram evolved = program;
  for (size_t i = 0; i < replace; ++i) {
    const OptimizationCase& candidate = *candidates[i];
    Clone fresh;
    fresh.clone_id = ++next_id;
    fresh.flags = candidate.compilation.opt;
    // the new clone's phase behavior scales the original by the measured speedup
    for (const auto& [phase, seconds] : original->phase_times) {
      fresh.phase_times[phase] = seconds / candidate.speedup;
    }
    evolved.clones[order[i]] = std::move(fresh);
  }
  evolved.validate();
  return evolved;
}

}  // namespace ctune
