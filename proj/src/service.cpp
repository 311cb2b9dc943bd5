#include "ctune/service.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <thread>

// default backlog of 5 drops connections under bursts of concurrent queries
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>

#include "ctune/error.hpp"

namespace ctune {

namespace {

std::string error_body(errc code, const std::string& message) {
  Packet packet;
  packet.add("STATUS", errc_name(code));
  packet.add("MESSAGE", message);
  return packet.serialize();
}

std::string malformed(const std::string& message) {
  Packet packet;
  packet.add("STATUS", "MALFORMED_QUERY");
  packet.add("MESSAGE", message);
  return packet.serialize();
}

}  // namespace

struct PredictionService::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread worker;
  int bound_port = 0;

  std::mutex mutex;
  std::map<std::string, Model> trained;  // key: kind|objective|compiler|platform
  std::string repo_digest;
  std::chrono::steady_clock::time_point last_check{};

  // Lazily (re)trains when the repository's training data changed; checks at
  // most once per retrain_interval.
  Model obtain_model(const PredictionQuery& query) {
    for (const auto& model : options.fixed_models) {
      if (model.kind == query.kind && model.objective == query.objective &&
          model.compiler_id == query.compiler_id && model.platform_id == query.platform_id) {
        return model;
      }
    }
    if (!options.fixed_models.empty() && options.repo_path.empty()) {
      raise(errc::model_mismatch, "no served model matches the query");
    }
    if (options.repo_path.empty()) raise(errc::insufficient_data, "service has no repository");

    std::lock_guard<std::mutex> lock(mutex);
    const auto now = std::chrono::steady_clock::now();
    const bool check_due =
        trained.empty() ||
        std::chrono::duration<double>(now - last_check).count() >= options.retrain_interval;
    const std::string key = std::string(model_kind_name(query.kind)) + "|" +
                            objective_name(query.objective) + "|" + query.compiler_id.str() +
                            "|" + query.platform_id.str();
    if (check_due) {
      last_check = now;
      Repository repo = Repository::open(options.repo_path, /*writable=*/false);
      Model fresh =
          train(repo, query.compiler_id, query.platform_id, query.objective, query.kind);
      auto it = trained.find(key);
      if (it == trained.end() || it->second.training_digest != fresh.training_digest) {
        trained[key] = std::move(fresh);
      }
    }
    auto it = trained.find(key);
    if (it == trained.end()) raise(errc::insufficient_data, "no model for this query yet");
    return it->second;
  }
};

PredictionService::PredictionService(ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
}

PredictionService::~PredictionService() { stop(); }

std::string PredictionService::handle(const std::string& body) {
  PredictionQuery query;
  try {
    Packet packet = parse_packet_fields(body);
    if (packet.empty()) raise(errc::malformed_line, "empty query body");
    query.platform_id = EntityId::parse(packet.get("PLATFORM_ID"));
    if (const auto* env = packet.find("ENVIRONMENT_ID"); env && !env->empty()) {
      query.environment_id = EntityId::parse(*env);
    }
    query.compiler_id = EntityId::parse(packet.get("COMPILER_ID"));
    query.kind = model_kind_from_name(packet.get("MODEL"));
    query.objective = objective_from_name(packet.get("OBJECTIVE"));
    query.features.kind = FeatureKind::static_features;
    query.features.entries =
        FeatureVector::parse_entries(packet.get("STATIC_FEATURE_VECTOR"));
    if (query.features.empty()) raise(errc::empty_feature_vector, "no feature entries");
  } catch (const Error& err) {
    return malformed(err.what());
  } catch (const std::exception& err) {
    return malformed(err.what());
  }

  try {
    Model model = impl_->obtain_model(query);
    Prediction prediction = predict(model, query);
    Packet response;
    response.add("STATUS", "OK");
    response.add("OPT_FLAGS", prediction.combo.canonical());
    response.add("MATCHED_PROGRAM_ID", prediction.matches.front().first.str());
    response.add("DISTANCE", format_float(prediction.matches.front().second));
    return response.serialize();
  } catch (const Error& err) {
    switch (err.code()) {
      case errc::insufficient_data:
        return error_body(errc::insufficient_data, err.what());
      case errc::model_mismatch:
        return error_body(errc::model_mismatch, err.what());
      case errc::empty_feature_vector:
        return malformed(err.what());
      default:
        return error_body(errc::internal, err.what());
    }
  } catch (const std::exception& err) {
    return error_body(errc::internal, err.what());
  }
}

int PredictionService::start(const std::string& bind_address, int port) {
  impl_->server.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(handle(req.body), "text/plain");
  });
  if (port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(bind_address);
  } else {
    if (!impl_->server.bind_to_port(bind_address, port)) {
      raise(errc::storage_failure,
            "cannot bind " + bind_address + ":" + std::to_string(port));
    }
    impl_->bound_port = port;
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

int PredictionService::port() const { return impl_->bound_port; }

void PredictionService::stop() {
  if (impl_ && impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

std::string query_service(const std::string& host, int port, const std::string& body) {
  httplib::Client client(host, port);
  client.set_read_timeout(30, 0);
  auto result = client.Post("/predict", body, "text/plain");
  if (!result) raise(errc::run_failed, "prediction service unreachable at " + host);
  return result->body;
}

}  // namespace ctune
