#include "ctune/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ctune/error.hpp"
#include "ctune/filters.hpp"
#include "ctune/md5.hpp"

namespace ctune {

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "nearest_neighbor") return ModelKind::nearest_neighbor;
  if (name == "per_flag_probability") return ModelKind::per_flag_probability;
  raise(errc::bad_value, "unknown model kind: " + name);
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::nearest_neighbor: return "nearest_neighbor";
    case ModelKind::per_flag_probability: return "per_flag_probability";
  }
  return "nearest_neighbor";
}

Objective objective_from_name(const std::string& name) {
  if (name == "time") return Objective::time;
  if (name == "size") return Objective::size;
  if (name == "time_and_size") return Objective::time_and_size;
  raise(errc::bad_value, "unknown objective: " + name);
}

const char* objective_name(Objective objective) {
  switch (objective) {
    case Objective::time: return "time";
    case Objective::size: return "size";
    case Objective::time_and_size: return "time_and_size";
  }
  return "time";
}

// ---------------------------------------------------------------------------
// training data gathering
// ---------------------------------------------------------------------------

namespace {

double case_metric(const OptimizationCase& opt_case, Objective objective) {
  return objective == Objective::size ? opt_case.size_ratio : opt_case.speedup;
}

struct ProgramData {
  EntityId program_id;
  FeatureVector features;
  std::vector<OptimizationCase> cases;  // correct and stable only
};

// Per-program feature vector: the feature packets of the first compilation
// that carries any, summed entry-wise across functions.
std::optional<FeatureVector> program_features(const Repository& repo, const EntityId& program_id) {
  for (const auto& comp : repo.compilations()) {
    if (comp.program_id != program_id) continue;
    auto records = repo.features_for_compile(comp.compile_id);
    if (records.empty()) continue;
    FeatureVector merged;
    merged.kind = records.front()->vector.kind;
    merged.anchor_pass = records.front()->vector.anchor_pass;
    for (const auto* record : records) {
      for (const auto& [index, value] : record->vector.entries) {
        const double* existing = merged.find(index);
        merged.set(index, (existing ? *existing : 0.0) + value);
      }
    }
    return merged;
  }
  return std::nullopt;
}

std::vector<ProgramData> gather(const Repository& repo, const EntityId& compiler_id,
                                const EntityId& platform_id,
                                const std::optional<EntityId>& exclude_program) {
  std::vector<ProgramData> out;
  for (const auto& entity : repo.entities()) {
    if (entity.kind != EntityKind::program) continue;
    EntityId program_id = entity.id;
    if (exclude_program && program_id == *exclude_program) continue;

    QueryCriteria criteria;
    criteria.program_id = program_id;
    criteria.compiler_id = compiler_id;
    criteria.platform_id = platform_id;
    ProgramData data;
    data.program_id = program_id;
    for (auto& opt_case : repo.query(criteria)) {
      if (!opt_case.output_correct()) continue;
      if (opt_case.dispersion() > kDefaultNoiseGate) continue;
      data.cases.push_back(std::move(opt_case));
    }
    if (data.cases.empty()) continue;

    std::optional<FeatureVector> features = program_features(repo, program_id);
    if (!features || features->empty()) continue;
    data.features = std::move(*features);
    out.push_back(std::move(data));
  }
  return out;
}

const OptimizationCase& best_case(const std::vector<OptimizationCase>& cases,
                                  Objective objective) {
  if (objective == Objective::time_and_size) {
    // the strongest speedup on the time/size frontier
    const std::vector<OptimizationCase> frontier = pareto_filter(cases);
    const OptimizationCase* best = &frontier.front();
    for (const auto& opt_case : frontier) {
      if (opt_case.speedup > best->speedup) best = &opt_case;
    }
    for (const auto& opt_case : cases) {
      if (opt_case.compilation.compile_id == best->compilation.compile_id) return opt_case;
    }
  }
  const OptimizationCase* best = &cases.front();
  for (const auto& opt_case : cases) {
    if (case_metric(opt_case, objective) > case_metric(*best, objective)) best = &opt_case;
  }
  return *best;
}

std::vector<std::pair<std::string, double>> top_decile_flag_probs(
    const std::vector<OptimizationCase>& cases, Objective objective) {
  std::vector<const OptimizationCase*> sorted;
  for (const auto& opt_case : cases) sorted.push_back(&opt_case);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [objective](const OptimizationCase* a, const OptimizationCase* b) {
                     return case_metric(*a, objective) > case_metric(*b, objective);
                   });
  const size_t top = std::max<size_t>(1, (sorted.size() + 9) / 10);

  std::set<std::string> all_flags;
  for (const auto& opt_case : cases) {
    for (const auto& flag : opt_case.compilation.opt.flags) all_flags.insert(flag);
  }
  std::vector<std::pair<std::string, double>> probs;
  for (const auto& flag : all_flags) {
    size_t hits = 0;
    for (size_t i = 0; i < top; ++i) {
      if (sorted[i]->compilation.opt.contains(flag)) ++hits;
    }
    probs.emplace_back(flag, static_cast<double>(hits) / static_cast<double>(top));
  }
  return probs;
}

}  // namespace

// ---------------------------------------------------------------------------
// train / predict
// ---------------------------------------------------------------------------

Model train(const Repository& repo, const EntityId& compiler_id, const EntityId& platform_id,
            Objective objective, ModelKind kind, const std::optional<EntityId>& exclude_program) {
  std::vector<ProgramData> data = gather(repo, compiler_id, platform_id, exclude_program);
  if (data.empty()) {
    raise(errc::insufficient_data,
          "no program has both a feature vector and a correct case for this compiler/platform");
  }

  Model model;
  model.kind = kind;
  model.compiler_id = compiler_id;
  model.platform_id = platform_id;
  model.objective = objective;

  for (const auto& program : data) {
    TrainingEntry entry;
    entry.program_id = program.program_id;
    entry.features = program.features;
    const OptimizationCase& best = best_case(program.cases, objective);
    entry.best_combo = best.compilation.opt;
    entry.best_metric = case_metric(best, objective);
    entry.flag_probs = top_decile_flag_probs(program.cases, objective);
    model.entries.push_back(std::move(entry));
  }
  std::sort(model.entries.begin(), model.entries.end(),
            [](const TrainingEntry& a, const TrainingEntry& b) {
              return a.program_id < b.program_id;
            });

  // z-normalization table over every index any entry mentions
  std::set<std::string> indices;
  for (const auto& entry : model.entries) {
    for (const auto& [index, value] : entry.features.entries) indices.insert(index);
  }
  const double n = static_cast<double>(model.entries.size());
  for (const auto& index : indices) {
    double sum = 0.0;
    for (const auto& entry : model.entries) {
      const double* v = entry.features.find(index);
      sum += v ? *v : 0.0;
    }
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& entry : model.entries) {
      const double* v = entry.features.find(index);
      const double d = (v ? *v : 0.0) - mean;
      var += d * d;
    }
    model.normalization.emplace_back(index, std::make_pair(mean, std::sqrt(var / n)));
  }

  std::string material;
  for (const auto& packet : model.to_packets()) material += packet.serialize();
  model.training_digest = md5_hex(material);
  return model;
}

Prediction predict(const Model& model, const PredictionQuery& query) {
  if (query.features.empty()) raise(errc::empty_feature_vector, "query without features");
  if (query.compiler_id != model.compiler_id || query.platform_id != model.platform_id) {
    raise(errc::model_mismatch, "model trained for a different compiler/platform");
  }
  if (query.kind != model.kind) {
    raise(errc::model_mismatch, std::string("model kind is ") + model_kind_name(model.kind));
  }
  if (model.entries.empty()) raise(errc::insufficient_data, "empty model");

  // z-scored Euclidean distance; absent indices impute to 0 after
  // normalization, zero-variance indices do not participate
  auto z = [](const FeatureVector& features, const std::string& index, double mean, double dev) {
    const double* v = features.find(index);
    if (!v) return 0.0;
    return (*v - mean) / dev;
  };
  Prediction prediction;
  for (const auto& entry : model.entries) {
    double sum = 0.0;
    for (const auto& [index, stats] : model.normalization) {
      if (stats.second == 0.0) continue;
      const double dq = z(query.features, index, stats.first, stats.second);
      const double dt = z(entry.features, index, stats.first, stats.second);
      sum += (dq - dt) * (dq - dt);
    }
    prediction.matches.emplace_back(entry.program_id, std::sqrt(sum));
  }
  std::sort(prediction.matches.begin(), prediction.matches.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first < b.first;
            });

  auto entry_for = [&model](const EntityId& id) -> const TrainingEntry& {
    for (const auto& entry : model.entries) {
      if (entry.program_id == id) return entry;
    }
    raise(errc::internal, "match without entry");
  };

  if (model.kind == ModelKind::nearest_neighbor) {
    prediction.combo = entry_for(prediction.matches.front().first).best_combo;
    return prediction;
  }

  // neighbor-weighted per-flag probabilities with a 0.5 inclusion threshold
  const size_t k = std::min<size_t>(static_cast<size_t>(std::max(1, model.k_neighbors)),
                                    prediction.matches.size());
  std::map<std::string, double> weighted;
  std::map<std::string, double> level_votes;
  double total_weight = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const TrainingEntry& entry = entry_for(prediction.matches[i].first);
    const double weight = 1.0 / (prediction.matches[i].second + 1e-9);
    total_weight += weight;
    for (const auto& [flag, prob] : entry.flag_probs) weighted[flag] += weight * prob;
    level_votes[entry.best_combo.base_level] += weight;
  }
  FlagCombination combo;
  double best_vote = -1.0;
  for (const auto& [level, vote] : level_votes) {  // map order breaks ties lexicographically
    if (vote > best_vote) {
      best_vote = vote;
      combo.base_level = level;
    }
  }
  for (const auto& [flag, mass] : weighted) {
    if (mass / total_weight >= 0.5) combo.flags.push_back(flag);
  }
  std::sort(combo.flags.begin(), combo.flags.end());
  prediction.combo = std::move(combo);
  return prediction;
}

// ---------------------------------------------------------------------------
// leave-one-out
// ---------------------------------------------------------------------------

LooReport leave_one_out_evaluate(const Repository& repo, ModelKind kind, Objective objective,
                                 Backend& backend, const DriverEnv& env) {
  if (repo.compilations().empty()) raise(errc::insufficient_data, "empty repository");
  const EntityId compiler_id = repo.compilations().front().compiler_id;
  const EntityId platform_id = repo.compilations().front().platform_id;

  std::vector<ProgramData> data = gather(repo, compiler_id, platform_id, std::nullopt);
  if (data.size() < 2) raise(errc::insufficient_data, "leave-one-out needs at least two programs");

  LooReport report;
  for (const auto& held_out : data) {
    Model model = train(repo, compiler_id, platform_id, objective, kind, held_out.program_id);

    PredictionQuery query;
    query.platform_id = platform_id;
    query.compiler_id = compiler_id;
    query.features = held_out.features;
    query.kind = kind;
    query.objective = objective;
    Prediction prediction = predict(model, query);

    // evaluate the predicted combination through the backend against the
    // held-out program's recorded baseline flags
    const OptimizationCase& sample = held_out.cases.front();
    const CompilationRecord* baseline_comp = repo.find_compilation(sample.baseline_compile_id);
    if (!baseline_comp) raise(errc::dangling_reference, "case without baseline compilation");
    const StoredEntity* program_entity = repo.find_entity(held_out.program_id);
    if (!program_entity) raise(errc::dangling_reference, "unknown program entity");
    ProgramDescriptor program = program_from_packet(program_entity->descriptor);

    const int dataset = sample.executions.front().dataset_number;
    auto evaluate = [&](const FlagCombination& combo) {
      RunOutcome outcome = backend.run(program, combo, dataset, 1, env, nullptr);
      std::vector<double> walls;
      for (const auto& timing : outcome.times) walls.push_back(timing.wall);
      return aggregate_times(walls, env.aggregator);
    };
    const double baseline_time = evaluate(baseline_comp->opt);
    const double predicted_time = evaluate(prediction.combo);
    if (predicted_time == 0.0) raise(errc::zero_time, "predicted combination runs in zero time");

    LooEntry entry;
    entry.program_id = held_out.program_id;
    entry.achieved_speedup = baseline_time / predicted_time;
    const OptimizationCase& best = best_case(held_out.cases, objective);
    entry.best_known_speedup = best.speedup;
    entry.fraction =
        entry.best_known_speedup > 0 ? entry.achieved_speedup / entry.best_known_speedup : 0.0;
    report.entries.push_back(entry);
  }
  double sum = 0.0;
  for (const auto& entry : report.entries) sum += entry.fraction;
  report.mean_fraction = sum / static_cast<double>(report.entries.size());
  return report;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::vector<Packet> Model::to_packets() const {
  std::vector<Packet> packets;
  Packet head;
  head.add("MODEL", model_kind_name(kind));
  head.add("COMPILER_ID", compiler_id.str());
  head.add("PLATFORM_ID", platform_id.str());
  head.add("OBJECTIVE", objective_name(objective));
  head.add("K_NEIGHBORS", std::to_string(k_neighbors));
  std::string norm;
  for (const auto& [index, stats] : normalization) {
    if (!norm.empty()) norm += ';';
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s:%.17g:%.17g", index.c_str(), stats.first, stats.second);
    norm += buf;
  }
  head.add("NORMALIZATION", norm);
  if (!training_digest.empty()) head.add("TRAINING_DIGEST", training_digest);
  packets.push_back(std::move(head));

  for (const auto& entry : entries) {
    Packet packet;
    packet.add("PROGRAM_ID", entry.program_id.str());
    packet.add("STATIC_FEATURE_VECTOR", entry.features.serialize_entries());
    packet.add("OPT_FLAGS", entry.best_combo.canonical());
    packet.add("BEST_METRIC", format_float(entry.best_metric));
    std::string probs;
    for (const auto& [flag, prob] : entry.flag_probs) {
      if (!probs.empty()) probs += ';';
      probs += flag + ":" + format_float(prob);
    }
    packet.add("FLAG_PROBS", probs);
    packets.push_back(std::move(packet));
  }
  return packets;
}

Model Model::from_packets(const std::vector<Packet>& packets) {
  if (packets.empty()) raise(errc::bad_value, "empty model stream");
  Model model;
  const Packet& head = packets.front();
  model.kind = model_kind_from_name(head.get("MODEL"));
  model.compiler_id = EntityId::parse(head.get("COMPILER_ID"));
  model.platform_id = EntityId::parse(head.get("PLATFORM_ID"));
  model.objective = objective_from_name(head.get("OBJECTIVE"));
  model.k_neighbors = static_cast<int>(parse_int(head.get("K_NEIGHBORS")));
  if (const auto* digest = head.find("TRAINING_DIGEST")) model.training_digest = *digest;
  const std::string& norm = head.get("NORMALIZATION");
  std::string token;
  auto flush_norm = [&model](const std::string& part) {
    if (part.empty()) return;
    const size_t c2 = part.rfind(':');
    const size_t c1 = part.rfind(':', c2 - 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      raise(errc::bad_value, "normalization entry: " + part);
    }
    model.normalization.emplace_back(
        part.substr(0, c1),
        std::make_pair(parse_float(part.substr(c1 + 1, c2 - c1 - 1)),
                       parse_float(part.substr(c2 + 1))));
  };
  for (char c : norm) {
    if (c == ';') {
      flush_norm(token);
      token.clear();
    } else {
      token += c;
    }
  }
  flush_norm(token);

  for (size_t i = 1; i < packets.size(); ++i) {
    const Packet& packet = packets[i];
    TrainingEntry entry;
    entry.program_id = EntityId::parse(packet.get("PROGRAM_ID"));
    entry.features.entries = FeatureVector::parse_entries(packet.get("STATIC_FEATURE_VECTOR"));
    entry.best_combo = FlagCombination::parse(packet.get("OPT_FLAGS"));
    entry.best_metric = parse_float(packet.get("BEST_METRIC"));
    const std::string& probs = packet.get("FLAG_PROBS");
    std::string part;
    auto flush_prob = [&entry](const std::string& text) {
      if (text.empty()) return;
      const size_t colon = text.rfind(':');
      if (colon == std::string::npos) raise(errc::bad_value, "flag prob: " + text);
      entry.flag_probs.emplace_back(text.substr(0, colon), parse_float(text.substr(colon + 1)));
    };
    for (char c : probs) {
      if (c == ';') {
        flush_prob(part);
        part.clear();
      } else {
        part += c;
      }
    }
    flush_prob(part);
    model.entries.push_back(std::move(entry));
  }
  return model;
}

std::vector<Packet> LooReport::to_packets() const {
  std::vector<Packet> packets;
  Packet head;
  head.add("PROGRAMS", std::to_string(entries.size()));
  head.add("MEAN_FRACTION", format_float(mean_fraction));
  packets.push_back(std::move(head));
  for (const auto& entry : entries) {
    Packet packet;
    packet.add("PROGRAM_ID", entry.program_id.str());
    packet.add("ACHIEVED_SPEEDUP", format_float(entry.achieved_speedup));
    packet.add("BEST_KNOWN_SPEEDUP", format_float(entry.best_known_speedup));
    packet.add("FRACTION", format_float(entry.fraction));
    packets.push_back(std::move(packet));
  }
  return packets;
}

}  // namespace ctune
