#include "ctune/ctune.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "ctune/driver.hpp"
#include "ctune/error.hpp"
#include "ctune/filters.hpp"
#include "ctune/predictor.hpp"
#include "ctune/real_backend.hpp"
#include "ctune/repository.hpp"
#include "ctune/search.hpp"
#include "ctune/service.hpp"
#include "ctune/synthetic.hpp"
#include "ctune/unidapt.hpp"

using namespace ctune;

namespace {

thread_local int g_last_code = CTUNE_OK;
thread_local std::string g_last_message;

int map_code(errc code) {
  switch (code) {
    case errc::ok: return CTUNE_OK;
    case errc::malformed_line:
    case errc::missing_required_key:
    case errc::duplicate_key:
    case errc::bad_value: return CTUNE_ERR_FORMAT;
    case errc::storage_failure:
    case errc::version_mismatch: return CTUNE_ERR_STORAGE;
    case errc::dangling_reference:
    case errc::unknown_case: return CTUNE_ERR_REFERENCE;
    case errc::compiler_not_found:
    case errc::compile_failed:
    case errc::run_failed:
    case errc::timeout:
    case errc::missing_reference:
    case errc::unsupported_runtime:
    case errc::baseline_failed:
    case errc::zero_time:
    case errc::incorrect_output:
    case errc::dataset_mismatch:
    case errc::evaluation_failed:
    case errc::empty_trace:
    case errc::no_candidates: return CTUNE_ERR_DRIVER;
    case errc::insufficient_data:
    case errc::model_mismatch:
    case errc::empty_feature_vector:
    case errc::empty_input:
    case errc::length_exceeds_space: return CTUNE_ERR_DATA;
    case errc::usage: return CTUNE_ERR_USAGE;
    case errc::internal: return CTUNE_ERR_INTERNAL;
  }
  return CTUNE_ERR_INTERNAL;
}

void clear_error() {
  g_last_code = CTUNE_OK;
  g_last_message.clear();
}

int set_error(const Error& err) {
  g_last_code = map_code(err.code());
  g_last_message = err.what();
  return g_last_code;
}

int set_error(const std::exception& err) {
  g_last_code = CTUNE_ERR_INTERNAL;
  g_last_message = err.what();
  return g_last_code;
}

char* dup_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

template <typename Fn>
char* guarded_string(Fn&& fn) {
  clear_error();
  try {
    return dup_string(fn());
  } catch (const Error& err) {
    set_error(err);
    return nullptr;
  } catch (const std::exception& err) {
    set_error(err);
    return nullptr;
  }
}

template <typename Fn>
int guarded_status(Fn&& fn) {
  clear_error();
  try {
    fn();
    return CTUNE_OK;
  } catch (const Error& err) {
    return set_error(err);
  } catch (const std::exception& err) {
    return set_error(err);
  }
}

DriverEnv env_from_packet(const std::string& text) {
  DriverEnv env = DriverEnv::from_environment();
  if (text.empty()) return env;
  Packet packet = parse_packet_fields(text);
  for (const auto& [key, value] : packet.fields()) {
    if (key == "RUNS") env.runs = static_cast<int>(parse_int(value));
    else if (key == "SEED") env.seed = parse_uint(value);
    else if (key == "NOTES") env.notes = value;
    else if (key == "OPT_PLATFORM") {
      env.platform_flags.clear();
      std::string token;
      for (char c : value + std::string(" ")) {
        if (c == ' ') {
          if (!token.empty()) env.platform_flags.push_back(token);
          token.clear();
        } else {
          token += c;
        }
      }
    } else if (key == "PROCESSOR_NUM") env.processor_num = static_cast<int>(parse_int(value));
    else if (key == "AGGREGATOR") env.aggregator = aggregator_from_name(value);
    else if (key == "DATE") env.date = value;
    else if (key == "TIME") env.time = value;
    else if (key == "COMPILE_TIMEOUT") env.compile_timeout = parse_float(value);
    else if (key == "RUN_TIMEOUT") env.run_timeout = parse_float(value);
    else if (key == "RUN_RE") env.run_re = value;
    else if (key == "LOOP_WRAPPER") env.loop_wrapper = parse_int(value);
  }
  return env;
}

std::string packets_to_text(const std::vector<Packet>& packets) {
  return serialize_packet_stream(packets);
}

}  // namespace

struct ctune_repo {
  Repository repo;
};

struct ctune_backend {
  std::unique_ptr<Backend> backend;
  std::vector<SyntheticProgram> synthetic_programs;  // empty for real backends
  std::string workdir;
};

struct ctune_session {
  ctune_repo* repo = nullptr;
  ctune_backend* backend = nullptr;
  ProgramDescriptor program;
  ExperimentIds ids;
  DriverEnv env;
  IdGenerator idgen;
  std::optional<CompilationRecord> last_compilation;
  FlagCombination last_flags;
  std::optional<RunOutputs> reference;
  std::optional<EntityId> baseline_run_id;

  std::filesystem::path workdir() const { return backend->workdir; }
};

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::storage_failure, "cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Per-dataset reference outputs persisted next to _comp/_run so that
// separate comp/run invocations in one directory share state.
constexpr const char* kReferenceFile = "_ccc_reference.pk";

Packet reference_to_packet(int dataset, const EntityId& baseline_run, const RunOutputs& outputs) {
  Packet packet;
  packet.add("DATASET", std::to_string(dataset));
  packet.add("BASELINE_RUN_ID", baseline_run.str());
  std::string files;
  for (const auto& [name, digest] : outputs.files) {
    if (!files.empty()) files += ';';
    files += name + ":" + digest;
  }
  packet.add("OUTPUT_FILES", files);
  return packet;
}

void store_reference(const std::filesystem::path& dir, int dataset, const EntityId& baseline_run,
                     const RunOutputs& outputs) {
  std::vector<Packet> packets;
  const auto path = dir / kReferenceFile;
  if (std::filesystem::exists(path)) {
    for (auto& packet : parse_packet_stream(read_text_file(path))) {
      if (!packet.empty() && packet.get("DATASET") != std::to_string(dataset)) {
        packets.push_back(std::move(packet));
      }
    }
  }
  packets.push_back(reference_to_packet(dataset, baseline_run, outputs));
  write_text_file(path, serialize_packet_stream(packets));
}

std::optional<std::pair<EntityId, RunOutputs>> load_reference(const std::filesystem::path& dir,
                                                              int dataset) {
  const auto path = dir / kReferenceFile;
  if (!std::filesystem::exists(path)) return std::nullopt;
  for (const auto& packet : parse_packet_stream(read_text_file(path))) {
    if (packet.empty() || packet.get("DATASET") != std::to_string(dataset)) continue;
    RunOutputs outputs;
    const std::string& files = packet.get("OUTPUT_FILES");
    std::string token;
    auto flush = [&outputs](const std::string& part) {
      if (part.empty()) return;
      const size_t colon = part.rfind(':');
      outputs.files.emplace_back(part.substr(0, colon), part.substr(colon + 1));
    };
    for (char c : files) {
      if (c == ';') {
        flush(token);
        token.clear();
      } else {
        token += c;
      }
    }
    flush(token);
    return std::make_pair(EntityId::parse(packet.get("BASELINE_RUN_ID")), outputs);
  }
  return std::nullopt;
}

}  // namespace

struct ctune_service {
  std::unique_ptr<PredictionService> service;
};

extern "C" {

const char* ctune_version(void) { return "0.1.0"; }

void ctune_free(char* text) { std::free(text); }

int ctune_last_error(void) { return g_last_code; }

const char* ctune_last_error_message(void) { return g_last_message.c_str(); }

/* ---- repository ------------------------------------------------------- */

ctune_repo* ctune_repo_open(const char* path, int writable) {
  clear_error();
  if (!path) {
    g_last_code = CTUNE_ERR_USAGE;
    g_last_message = "path is required";
    return nullptr;
  }
  try {
    auto* handle = new ctune_repo{Repository::open(path, writable != 0)};
    return handle;
  } catch (const Error& err) {
    set_error(err);
  } catch (const std::exception& err) {
    set_error(err);
  }
  return nullptr;
}

ctune_repo* ctune_repo_create(const char* path, const char* options_packet) {
  clear_error();
  if (!path) {
    g_last_code = CTUNE_ERR_USAGE;
    g_last_message = "path is required";
    return nullptr;
  }
  try {
    Repository::CreateOptions options;
    if (options_packet && *options_packet) {
      Packet packet = parse_packet_fields(options_packet);
      if (const auto* v = packet.find("COD_VERSION")) options.cod_version = *v;
      if (const auto* v = packet.find("CREATED")) options.created = *v;
      if (const auto* v = packet.find("INSTANCE_ID"); v && !v->empty()) {
        options.instance_id = EntityId::parse(*v);
      }
    }
    return new ctune_repo{Repository::create(path, options)};
  } catch (const Error& err) {
    set_error(err);
  } catch (const std::exception& err) {
    set_error(err);
  }
  return nullptr;
}

void ctune_repo_close(ctune_repo* repo) { delete repo; }

char* ctune_repo_info(ctune_repo* repo) {
  return guarded_string([&] { return repo->repo.info().to_packet().serialize(); });
}

char* ctune_repo_register(ctune_repo* repo, const char* kind, const char* descriptor_packet) {
  return guarded_string([&] {
    IdGenerator idgen;
    EntityId id = repo->repo.register_entity(entity_kind_from_name(kind ? kind : ""),
                                             parse_packet_fields(descriptor_packet), idgen);
    return id.str();
  });
}

int ctune_repo_record(ctune_repo* repo, const char* packets_text, size_t* recorded) {
  return guarded_status([&] {
    IdGenerator idgen;
    size_t count = repo->repo.import_packets(packets_text ? packets_text : "", idgen);
    if (recorded) *recorded = count;
  });
}

char* ctune_repo_query(ctune_repo* repo, const char* criteria_packet) {
  return guarded_string([&] {
    QueryCriteria criteria = QueryCriteria::from_packet(parse_packet_fields(criteria_packet));
    std::vector<Packet> packets;
    for (const auto& opt_case : repo->repo.query(criteria)) {
      packets.push_back(opt_case.summary_packet());
    }
    return packets_to_text(packets);
  });
}

int ctune_repo_merge(ctune_repo* source, ctune_repo* destination, uint64_t stats_out[3]) {
  return guarded_status([&] {
    MergeStats stats = Repository::merge(source->repo, destination->repo);
    if (stats_out) {
      stats_out[0] = stats.new_records;
      stats_out[1] = stats.duplicates;
      stats_out[2] = stats.conflicts;
    }
  });
}

int ctune_repo_rank(ctune_repo* repo, const char* run_id, int rank) {
  return guarded_status([&] { rank_case(repo->repo, EntityId::parse(run_id ? run_id : ""), rank); });
}

int ctune_repo_import(ctune_repo* repo, const char* directory) {
  return guarded_status([&] {
    IdGenerator idgen;
    repo->repo.import_directory(directory ? directory : ".", idgen);
  });
}

/* ---- backends and sessions -------------------------------------------- */

ctune_backend* ctune_backend_open(ctune_repo* repo, const char* spec, const char* workdir) {
  clear_error();
  try {
    std::string text = spec ? spec : "";
    auto* handle = new ctune_backend;
    handle->workdir = workdir && *workdir ? workdir : ".";
    if (text.rfind("synthetic:", 0) == 0) {
      handle->synthetic_programs = load_synthetic_programs(text.substr(10));
      handle->backend = std::make_unique<SyntheticBackend>(handle->synthetic_programs);
    } else {
      std::string name = text.rfind("real:", 0) == 0 ? text.substr(5) : text;
      if (!repo) raise(errc::usage, "a repository is required to resolve compiler " + name);
      auto compiler = repo->repo.find_compiler_by_name(name);
      if (!compiler) raise(errc::compiler_not_found, "compiler " + name + " is not registered");
      handle->backend = std::make_unique<RealBackend>(*compiler, handle->workdir);
    }
    return handle;
  } catch (const Error& err) {
    set_error(err);
  } catch (const std::exception& err) {
    set_error(err);
  }
  return nullptr;
}

void ctune_backend_close(ctune_backend* backend) { delete backend; }

ctune_session* ctune_session_new(ctune_repo* repo, ctune_backend* backend,
                                 const char* program_name, const char* env_packet) {
  clear_error();
  try {
    if (!repo || !backend) raise(errc::usage, "session needs a repository and a backend");
    auto* session = new ctune_session;
    session->repo = repo;
    session->backend = backend;
    session->env = env_from_packet(env_packet ? env_packet : "");
    if (session->env.seed != 0) session->idgen = IdGenerator(session->env.seed ^ 0x1d5d5c4d9u);

    std::string name = program_name ? program_name : "";
    if (!backend->synthetic_programs.empty()) {
      const SyntheticProgram* chosen = nullptr;
      for (const auto& program : backend->synthetic_programs) {
        if (name.empty() || program.name == name) {
          chosen = &program;
          break;
        }
      }
      if (!chosen) raise(errc::usage, "no synthetic program named " + name);
      session->program = chosen->descriptor();
    } else {
      auto program = repo->repo.find_program_by_name(name);
      if (!program) {
        // fall back to the working directory contract: _ccc_program_id +
        // _ccc_info_datasets describe the program
        namespace fs = std::filesystem;
        const fs::path dir = backend->workdir;
        ProgramDescriptor descriptor;
        descriptor.name = name.empty() ? dir.filename().string() : name;
        descriptor.source_dir = dir.string();
        if (fs::exists(dir / "_ccc_program_id")) {
          std::ifstream in(dir / "_ccc_program_id");
          std::string id;
          in >> id;
          descriptor.id = EntityId::parse(id);
        }
        if (fs::exists(dir / "_ccc_info_datasets")) {
          descriptor.datasets = load_dataset_descriptor(dir / "_ccc_info_datasets");
        } else {
          DatasetEntry entry;
          entry.number = 1;
          entry.command_line = "";
          descriptor.datasets.push_back(entry);
        }
        session->program = std::move(descriptor);
      } else {
        session->program = *program;
      }
    }

    PlatformDescriptor platform{EntityId{}, "default-platform", ""};
    PlatformDescriptor environment{EntityId{}, "default-environment", ""};
    CompilerDescriptor compiler;
    compiler.name = backend->backend->name();
    if (auto known = repo->repo.find_compiler_by_name(compiler.name)) compiler = *known;
    if (compiler.invocation_template.empty()) {
      compiler.invocation_template = "(builtin) {SOURCES} {OUTPUT} {FLAGS}";
    }
    session->ids = register_experiment_entities(repo->repo, platform, environment, compiler,
                                                session->program, session->idgen);
    return session;
  } catch (const Error& err) {
    set_error(err);
  } catch (const std::exception& err) {
    set_error(err);
  }
  return nullptr;
}

void ctune_session_close(ctune_session* session) { delete session; }

char* ctune_session_comp(ctune_session* session, const char* opt_flags, const char* aux_flags) {
  return guarded_string([&] {
    FlagCombination flags =
        FlagCombination::parse(opt_flags ? opt_flags : "", aux_flags ? aux_flags : "");
    ExperimentContext ctx{*session->backend->backend, session->repo->repo, session->ids,
                          session->env, session->idgen};
    auto [record, outcome] = compile_program(ctx, session->program, flags);
    session->idgen = ctx.idgen;

    // an identical earlier compilation (same program, flags and object)
    // already describes this build; reuse it instead of appending
    const CompilationRecord* existing = nullptr;
    for (const auto& prior : session->repo->repo.compilations()) {
      if (prior.program_id == record.program_id && prior.obj_md5 == record.obj_md5 &&
          prior.opt.canonical() == record.opt.canonical() &&
          prior.opt.platform_canonical() == record.opt.platform_canonical()) {
        existing = &prior;
        break;
      }
    }
    if (existing) {
      record = *existing;
    } else {
      session->repo->repo.record(record);
    }

    std::string text = record.to_packet().serialize();
    if (!existing && outcome.features && !outcome.features->empty()) {
      FeatureRecord features;
      features.feature_id = session->idgen.next();
      features.compile_id = record.compile_id;
      features.vector = *outcome.features;
      session->repo->repo.record_features(features);
      write_text_file(session->workdir() / "_prog_feat",
                      features.to_packet().serialize() + "\n");
      text += "\n" + features.to_packet().serialize();
    }
    session->last_compilation = record;
    session->last_flags = record.opt;
    write_text_file(session->workdir() / "_comp", record.to_packet().serialize() + "\n");
    return text;
  });
}

char* ctune_session_run(ctune_session* session, int dataset, int is_baseline) {
  return guarded_string([&] {
    if (!session->last_compilation) {
      // separate invocation: pick up the compilation recorded in this directory
      const auto comp_path = session->workdir() / "_comp";
      if (!std::filesystem::exists(comp_path)) {
        raise(errc::missing_reference, "run requested before any successful comp");
      }
      session->last_compilation =
          CompilationRecord::from_packet(parse_packet_fields(read_text_file(comp_path)));
      session->last_flags = session->last_compilation->opt;
    }
    if (!is_baseline && !session->reference) {
      if (auto stored = load_reference(session->workdir(), dataset)) {
        session->baseline_run_id = stored->first;
        session->reference = stored->second;
      }
    }
    ExperimentContext ctx{*session->backend->backend, session->repo->repo, session->ids,
                          session->env, session->idgen};
    const RunOutputs* reference =
        session->reference.has_value() ? &session->reference.value() : nullptr;
    EntityId baseline = session->baseline_run_id.value_or(EntityId{});
    auto [record, outcome] =
        run_program(ctx, session->program, *session->last_compilation, session->last_flags,
                    dataset, session->env.runs, is_baseline != 0, reference, baseline);
    session->idgen = ctx.idgen;
    session->repo->repo.record(record);
    if (is_baseline) {
      session->reference = outcome.outputs;
      session->baseline_run_id = record.run_id;
      store_reference(session->workdir(), dataset, record.run_id, outcome.outputs);
    }
    write_text_file(session->workdir() / "_run", record.to_packet().serialize() + "\n");
    return record.to_packet().serialize();
  });
}

char* ctune_session_explore(ctune_session* session, const char* space_text,
                            const char* config_packet) {
  return guarded_string([&] {
    FlagSpace space = FlagSpace::parse(space_text ? space_text : "");
    ExplorationConfig config;
    if (config_packet && *config_packet) {
      Packet packet = parse_packet_fields(config_packet);
      for (const auto& [key, value] : packet.fields()) {
        if (key == "STRATEGY") config.strategy = strategy_from_name(value);
        else if (key == "BUDGET") config.budget = static_cast<uint32_t>(parse_uint(value));
        else if (key == "SEED") config.seed = parse_uint(value);
        else if (key == "PROBABILITY") config.per_flag_probability = parse_float(value);
        else if (key == "FIXED_LENGTH") config.fixed_length = static_cast<uint32_t>(parse_uint(value));
        else if (key == "REPEATS") config.repeats = static_cast<int>(parse_int(value));
        else if (key == "DATASET") config.dataset = static_cast<int>(parse_int(value));
        else if (key == "REFERENCE_LEVEL") config.reference_level = value;
        else if (key == "EPSILON") config.prune_epsilon = parse_float(value);
      }
    }
    ExperimentContext ctx{*session->backend->backend, session->repo->repo, session->ids,
                          session->env, session->idgen};
    ExplorationReport report = explore(session->program, space, config, ctx);
    session->idgen = ctx.idgen;
    return packets_to_text(report.to_packets());
  });
}

/* ---- filters ----------------------------------------------------------- */

char* ctune_filter(const char* name, const char* cases_text, const char* options_packet) {
  return guarded_string([&] {
    double min_speedup = 1.0;
    double noise_gate = kDefaultNoiseGate;
    bool with_compile_time = false;
    if (options_packet && *options_packet) {
      Packet packet = parse_packet_fields(options_packet);
      if (const auto* v = packet.find("MIN_SPEEDUP")) min_speedup = parse_float(*v);
      if (const auto* v = packet.find("NOISE_GATE")) noise_gate = parse_float(*v);
      if (const auto* v = packet.find("WITH_COMPILE_TIME")) with_compile_time = *v == "1";
    }

    // case summaries in, case summaries out
    std::vector<Packet> packets = parse_packet_stream(cases_text ? cases_text : "");
    std::vector<OptimizationCase> cases;
    for (const auto& packet : packets) {
      if (packet.empty()) continue;
      OptimizationCase opt_case;
      opt_case.compilation.compile_id = EntityId::parse(packet.get("COMPILE_ID"));
      opt_case.compilation.opt = FlagCombination::parse(
          packet.has("OPT_FLAGS") ? packet.get("OPT_FLAGS") : "",
          packet.has("OPT_FLAGS_PLATFORM") ? packet.get("OPT_FLAGS_PLATFORM") : "");
      ExecutionRecord exec;
      if (packet.has("RUN_ID")) exec.run_id = EntityId::parse(packet.get("RUN_ID"));
      exec.output_correct = !packet.has("OUTPUT_CORRECT") || packet.get("OUTPUT_CORRECT") == "1";
      if (packet.has("DISPERSION")) {
        // reconstruct a two-point repeat list with the stated dispersion
        const double dispersion = parse_float(packet.get("DISPERSION"));
        exec.run_time = 1.0;
        exec.extensions.emplace_back("RUN_TIME1", format_float(1.0 - dispersion / 2.0));
        exec.extensions.emplace_back("RUN_TIME2", format_float(1.0 + dispersion / 2.0));
      }
      if (packet.has("RANK")) exec.rank = static_cast<int>(parse_int(packet.get("RANK")));
      opt_case.rank = exec.rank;
      opt_case.executions.push_back(std::move(exec));
      opt_case.speedup = parse_float(packet.get("SPEEDUP"));
      opt_case.size_ratio = packet.has("SIZE_RATIO") ? parse_float(packet.get("SIZE_RATIO")) : 1.0;
      opt_case.compile_time_ratio =
          packet.has("COMPILE_TIME_RATIO") ? parse_float(packet.get("COMPILE_TIME_RATIO")) : 1.0;
      cases.push_back(std::move(opt_case));
    }

    std::vector<OptimizationCase> kept;
    std::string filter = name ? name : "";
    if (filter == "get-all-best-flags-time") {
      kept = best_time_filter(cases, min_speedup, noise_gate);
    } else if (filter == "get-all-best-flags-time-size-pareto") {
      kept = best_time_filter(cases, min_speedup, noise_gate);
      kept = pareto_filter(kept, with_compile_time);
    } else {
      raise(errc::usage, "unknown filter: " + filter);
    }
    std::vector<Packet> out;
    for (const auto& opt_case : kept) out.push_back(opt_case.summary_packet());
    return packets_to_text(out);
  });
}

char* ctune_assess_noise(const char* times_text, const char* aggregator) {
  return guarded_string([&] {
    std::vector<double> times;
    std::string token;
    std::string text = times_text ? times_text : "";
    text += ' ';
    for (char c : text) {
      if (c == ' ' || c == '\t' || c == '\n' || c == ',') {
        if (!token.empty()) times.push_back(parse_float(token));
        token.clear();
      } else {
        token += c;
      }
    }
    Aggregator agg = aggregator && *aggregator ? aggregator_from_name(aggregator)
                                               : Aggregator::median;
    NoiseAssessment noise = assess_noise(times, agg);
    Packet packet;
    packet.add("AGGREGATE", format_float(noise.aggregate));
    packet.add("DISPERSION", format_float(noise.dispersion));
    packet.add("STABLE", noise.stable ? "1" : "0");
    return packet.serialize();
  });
}

/* ---- prediction -------------------------------------------------------- */

char* ctune_train(ctune_repo* repo, const char* options_packet) {
  return guarded_string([&] {
    Packet packet = parse_packet_fields(options_packet ? options_packet : "");
    EntityId compiler_id = EntityId::parse(packet.get("COMPILER_ID"));
    EntityId platform_id = EntityId::parse(packet.get("PLATFORM_ID"));
    Objective objective = packet.has("OBJECTIVE") ? objective_from_name(packet.get("OBJECTIVE"))
                                                  : Objective::time;
    ModelKind kind = packet.has("MODEL") ? model_kind_from_name(packet.get("MODEL"))
                                         : ModelKind::nearest_neighbor;
    Model model = train(repo->repo, compiler_id, platform_id, objective, kind);
    return packets_to_text(model.to_packets());
  });
}

char* ctune_predict(const char* model_text, const char* query_packet) {
  return guarded_string([&] {
    Model model = Model::from_packets(parse_packet_stream(model_text ? model_text : ""));
    ServiceOptions options;
    options.fixed_models.push_back(std::move(model));
    PredictionService service(std::move(options));
    return service.handle(query_packet ? query_packet : "");
  });
}

char* ctune_loo_evaluate(ctune_repo* repo, ctune_backend* backend, const char* options_packet) {
  return guarded_string([&] {
    if (!backend) raise(errc::usage, "leave-one-out needs a backend");
    Packet packet = parse_packet_fields(options_packet ? options_packet : "");
    Objective objective = packet.has("OBJECTIVE") ? objective_from_name(packet.get("OBJECTIVE"))
                                                  : Objective::time;
    ModelKind kind = packet.has("MODEL") ? model_kind_from_name(packet.get("MODEL"))
                                         : ModelKind::nearest_neighbor;
    DriverEnv env = env_from_packet(packet.has("ENV") ? packet.get("ENV") : "");
    LooReport report =
        leave_one_out_evaluate(repo->repo, kind, objective, *backend->backend, env);
    return packets_to_text(report.to_packets());
  });
}

ctune_service* ctune_serve_start(const char* repo_path, const char* bind_address, int port) {
  clear_error();
  try {
    ServiceOptions options;
    options.repo_path = repo_path ? repo_path : "";
    auto service = std::make_unique<PredictionService>(std::move(options));
    service->start(bind_address && *bind_address ? bind_address : "127.0.0.1", port);
    auto* handle = new ctune_service;
    handle->service = std::move(service);
    return handle;
  } catch (const Error& err) {
    set_error(err);
  } catch (const std::exception& err) {
    set_error(err);
  }
  return nullptr;
}

int ctune_serve_port(ctune_service* service) {
  return service && service->service ? service->service->port() : -1;
}

void ctune_serve_stop(ctune_service* service) {
  if (service && service->service) service->service->stop();
  delete service;
}

char* ctune_predict_service(const char* host, int port, const char* query_packet) {
  return guarded_string([&] {
    return query_service(host && *host ? host : "127.0.0.1", port,
                         query_packet ? query_packet : "");
  });
}

/* ---- runtime adaptation ------------------------------------------------ */

char* ctune_adapt_simulate(const char* program_text, const char* trace_text,
                           const char* policy_packet) {
  return guarded_string([&] {
    AdaptiveProgram program =
        AdaptiveProgram::from_packets(parse_packet_stream(program_text ? program_text : ""));
    TraceSpec spec = TraceSpec::from_packets(parse_packet_stream(trace_text ? trace_text : ""));
    PhaseTrace trace = PhaseTrace::generate(spec);
    AdaptationPolicy policy;
    bool with_csv = false;
    if (policy_packet && *policy_packet) {
      Packet packet = parse_packet_fields(policy_packet);
      if (const auto* v = packet.find("BINS")) policy.bins = static_cast<int>(parse_int(*v));
      if (const auto* v = packet.find("RECALIBRATION_INTERVAL")) {
        policy.recalibration_interval = parse_int(*v);
      }
      if (const auto* v = packet.find("CSV")) with_csv = *v == "1";
    }
    SimReport report = simulate(program, trace, policy);
    std::string text = packets_to_text(report.to_packets());
    if (with_csv) {
      Packet csv;
      csv.add("CSV_FILE", "inline");
      text += csv.serialize() + "\n" + report.to_csv();
    }
    return text;
  });
}

char* ctune_adapt_evolve(ctune_repo* repo, const char* program_text, int k) {
  return guarded_string([&] {
    AdaptiveProgram program =
        AdaptiveProgram::from_packets(parse_packet_stream(program_text ? program_text : ""));
    AdaptiveProgram evolved =
        evolve_clones(program, repo->repo, k < 0 ? 0 : static_cast<size_t>(k));
    return packets_to_text(evolved.to_packets());
  });
}

}  // extern "C"
