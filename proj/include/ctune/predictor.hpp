#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctune/backend.hpp"
#include "ctune/records.hpp"
#include "ctune/repository.hpp"

namespace ctune {

enum class ModelKind { nearest_neighbor, per_flag_probability };
enum class Objective { time, size, time_and_size };

ModelKind model_kind_from_name(const std::string& name);
const char* model_kind_name(ModelKind kind);
Objective objective_from_name(const std::string& name);
const char* objective_name(Objective objective);

struct TrainingEntry {
  EntityId program_id;
  FeatureVector features;
  FlagCombination best_combo;
  double best_metric = 1.0;
  // per-flag frequency among this program's top-decile cases
  std::vector<std::pair<std::string, double>> flag_probs;
};

struct Model {
  ModelKind kind = ModelKind::nearest_neighbor;
  EntityId compiler_id;
  EntityId platform_id;
  Objective objective = Objective::time;
  std::vector<TrainingEntry> entries;
  // per-index (mean, stddev) over the training vectors; zero-variance
  // indices drop out of the distance
  std::vector<std::pair<std::string, std::pair<double, double>>> normalization;
  int k_neighbors = 3;
  std::string training_digest;

  std::vector<Packet> to_packets() const;
  static Model from_packets(const std::vector<Packet>& packets);
};

struct PredictionQuery {
  EntityId platform_id;
  EntityId environment_id;
  EntityId compiler_id;
  FeatureVector features;
  ModelKind kind = ModelKind::nearest_neighbor;
  Objective objective = Objective::time;
};

struct Prediction {
  FlagCombination combo;
  std::vector<std::pair<EntityId, double>> matches;  // (program id, distance), nearest first
};

// Builds a model from every program that has both a recorded feature vector
// and at least one correct, stable case for this compiler/platform.
Model train(const Repository& repo, const EntityId& compiler_id, const EntityId& platform_id,
            Objective objective, ModelKind kind,
            const std::optional<EntityId>& exclude_program = std::nullopt);

Prediction predict(const Model& model, const PredictionQuery& query);

struct LooEntry {
  EntityId program_id;
  double achieved_speedup = 0.0;
  double best_known_speedup = 0.0;
  double fraction = 0.0;
};

struct LooReport {
  std::vector<LooEntry> entries;
  double mean_fraction = 0.0;

  std::vector<Packet> to_packets() const;
};

// Hold out each program, train on the rest, evaluate the prediction through
// the backend, and report achieved / best-known speedup.
LooReport leave_one_out_evaluate(const Repository& repo, ModelKind kind, Objective objective,
                                 Backend& backend, const DriverEnv& env);

}  // namespace ctune
