#pragma once

#include <memory>
#include <string>

#include "ctune/predictor.hpp"

namespace ctune {

// HTTP POST /predict; request and response bodies are packet-format text.
//
// Request keys:  PLATFORM_ID, ENVIRONMENT_ID, COMPILER_ID,
//                MODEL (nearest_neighbor | per_flag_probability),
//                OBJECTIVE (time | size | time_and_size),
//                STATIC_FEATURE_VECTOR (ft1=..., ft2=...)
// Response keys: STATUS (OK | MALFORMED_QUERY | INSUFFICIENT_DATA |
//                MODEL_MISMATCH), OPT_FLAGS, MATCHED_PROGRAM_ID, DISTANCE.
struct ServiceOptions {
  std::string repo_path;           // train-on-demand source
  std::vector<Model> fixed_models; // served as-is; no retraining
  double retrain_interval = 10.0;  // seconds between repository digest checks
};

class PredictionService {
 public:
  explicit PredictionService(ServiceOptions options);
  ~PredictionService();

  PredictionService(const PredictionService&) = delete;
  PredictionService& operator=(const PredictionService&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& bind_address, int port);
  int port() const;
  void stop();

  // Request handling, exposed for in-process use and tests.
  std::string handle(const std::string& body);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Client side of the wire protocol ("milepost-gcc" style wrapper).
std::string query_service(const std::string& host, int port, const std::string& body);

}  // namespace ctune
