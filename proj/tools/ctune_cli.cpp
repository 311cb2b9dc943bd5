// ctune: command-line front end over the libctune C API.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include "ctune/ctune.h"

#include <CLI11.hpp>

#include <csignal>
#include <ctime>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr const char* kStrategies =
    "glob-flags-rnd-uniform, glob-flags-rnd-fixed, glob-flags-one-by-one, glob-flags-one-off-rnd";
constexpr const char* kFilters =
    "get-all-best-flags-time, get-all-best-flags-time-size-pareto";
constexpr const char* kEnvHelp =
    "Environment: CCC_DB (local repository path), CCC_CT_DB (shared repository path),\n"
    "CCC_RUNS (repeats per run), CCC_OPT_PLATFORM (auxiliary platform flags),\n"
    "CCC_PROCESSOR_NUM (CPU pin hint), CCC_NOTES (recorded notes),\n"
    "CCC_LOOP_WRAPPER (loop wrapper bound override), CCC_RUN_RE (runtime; only\n"
    "native is supported), CTUNE_COUNTERS_HOOK (counter collection command).\n"
    "Accepted and ignored: CCC_URL, CCC_USER, CCC_PASS, CCC_SSL and the CCC_C_*/\n"
    "CCC_CT_* credential variants (no network database protocol).";

struct Cleanup {
  ctune_repo* repo = nullptr;
  ctune_backend* backend = nullptr;
  ctune_session* session = nullptr;
  ~Cleanup() {
    if (session) ctune_session_close(session);
    if (backend) ctune_backend_close(backend);
    if (repo) ctune_repo_close(repo);
  }
};

int fail(const char* what) {
  std::fprintf(stderr, "ctune: %s failed\nSTATUS=%d\nMESSAGE=%s\n", what, ctune_last_error(),
               ctune_last_error_message());
  return 1;
}

std::string take(char* text) {
  std::string out = text ? text : "";
  ctune_free(text);
  return out;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value && *value ? value : fallback;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "ctune: cannot read %s\n", path.c_str());
    std::exit(1);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// value of KEY= in the first packet that has it, empty otherwise
std::string packet_value(const std::string& text, const std::string& key) {
  const std::string needle = key + "=";
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    if (text.compare(pos, needle.size(), needle) == 0) {
      return text.substr(pos + needle.size(), end - pos - needle.size());
    }
    pos = end + 1;
  }
  return "";
}

ctune_repo* open_local(const std::string& path, bool create_if_missing) {
  ctune_repo* repo = ctune_repo_open(path.c_str(), 1);
  if (!repo && create_if_missing) repo = ctune_repo_create(path.c_str(), "");
  return repo;
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& flag : flags) {
    if (!out.empty()) out += ' ';
    out += flag;
  }
  return out;
}

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctune: collective optimization exploration, filtering, prediction and\n"
               "runtime-adaptation tooling around a shared optimization repository.\n\n" +
               std::string(kEnvHelp)};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string local_db = env_or("CCC_DB", "./ccc_local_db");
  std::string shared_db = env_or("CCC_CT_DB", "./ccc_shared_db");
  bool packets = false;
  app.add_option("--local-db", local_db, "Local repository path (default $CCC_DB)");
  app.add_option("--shared-db", shared_db, "Shared repository path (default $CCC_CT_DB)");
  app.add_flag("--packets", packets, "Emit packet-format results on stdout");

  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Program working directory for comp/run");
  uint64_t seed = 0;
  app.add_option("--seed", seed, "Deterministic seed for ids, draws and surrogate noise");
  int runs = 0;
  app.add_option("--runs", runs, "Repeats per execution (default $CCC_RUNS or 1)");
  std::string notes;
  app.add_option("--notes", notes, "Notes recorded with every packet (default $CCC_NOTES)");
  std::string aggregator;
  app.add_option("--aggregator", aggregator, "Time aggregator: min | median | mean");

  auto env_packet = [&]() {
    std::string text;
    if (seed) text += "SEED=" + std::to_string(seed) + "\n";
    if (runs > 0) text += "RUNS=" + std::to_string(runs) + "\n";
    if (!notes.empty()) text += "NOTES=" + notes + "\n";
    if (!aggregator.empty()) text += "AGGREGATOR=" + aggregator + "\n";
    return text;
  };

  // ---- register ----------------------------------------------------------
  auto* cmd_register = app.add_subcommand("register", "Register a platform/environment/compiler/"
                                                      "program entity in the local repository");
  std::string reg_kind, reg_name, reg_template, reg_flag_space, reg_program_dir, reg_notes;
  cmd_register->add_option("kind", reg_kind, "platform|environment|compiler|program|runtime")
      ->required();
  cmd_register->add_option("--name", reg_name, "Descriptive entity name")->required();
  cmd_register->add_option("--invocation-template", reg_template,
                           "Compiler command with {SOURCES} {OUTPUT} {FLAGS}");
  cmd_register->add_option("--flag-space-ref", reg_flag_space, "Flag space file reference");
  cmd_register->add_option("--program-dir", reg_program_dir,
                           "Program directory holding _ccc_info_datasets");

  // ---- comp / run --------------------------------------------------------
  auto* cmd_comp = app.add_subcommand(
      "comp", "Compile: ctune comp <compiler> <recorded flags...> [-- <aux flags...>]\n"
              "<compiler> is synthetic:<sprog file> or a registered compiler name");
  std::vector<std::string> comp_args;
  std::string comp_program;
  cmd_comp->add_option("--program", comp_program, "Program name (synthetic backends)");
  cmd_comp->add_option("args", comp_args, "compiler name, then flags; '--' separates aux flags")
      ->required();
  cmd_comp->positionals_at_end();

  auto* cmd_run = app.add_subcommand("run", "Run: ctune run <dataset number> [1 if baseline]");
  int run_dataset = 0;
  int run_baseline = 0;
  std::string run_backend_spec;
  std::string run_program;
  cmd_run->add_option("dataset", run_dataset, "Dataset number (1-based)")->required();
  cmd_run->add_option("baseline", run_baseline, "1 marks the baseline reference run");
  cmd_run->add_option("--backend", run_backend_spec,
                      "Backend spec; defaults to the one stored in _comp");
  cmd_run->add_option("--program", run_program, "Program name (synthetic backends)");

  // ---- explore -----------------------------------------------------------
  auto* cmd_explore = app.add_subcommand(
      "explore", std::string("Search the flag space; strategies: ") + kStrategies);
  std::string ex_strategy, ex_space, ex_backend, ex_program, ex_reference;
  uint32_t ex_budget = 100;
  uint32_t ex_fixed = 1;
  double ex_probability = 0.5;
  double ex_epsilon = 0.02;
  int ex_dataset = 1;
  cmd_explore->add_option("strategy", ex_strategy, kStrategies)->required();
  cmd_explore->add_option("--space", ex_space, "Flag-space packet file")->required();
  cmd_explore->add_option("--backend", ex_backend, "synthetic:<file> or compiler name")
      ->required();
  cmd_explore->add_option("--program", ex_program, "Program name");
  cmd_explore->add_option("--budget", ex_budget, "Max evaluated combinations");
  cmd_explore->add_option("--probability", ex_probability, "Per-flag selection probability");
  cmd_explore->add_option("--fixed-length", ex_fixed, "Combination length (rnd-fixed)");
  cmd_explore->add_option("--dataset", ex_dataset, "Dataset number");
  cmd_explore->add_option("--reference-level", ex_reference, "Baseline level (default -O3)");
  cmd_explore->add_option("--epsilon", ex_epsilon, "Pruning threshold (one-off-rnd)");

  // ---- filter ------------------------------------------------------------
  auto* cmd_filter =
      app.add_subcommand("filter", std::string("Select profitable cases; filters: ") + kFilters);
  std::string fl_name;
  double fl_min_speedup = 1.0;
  double fl_noise_gate = 0.05;
  bool fl_compile_time = false;
  cmd_filter->add_option("name", fl_name, kFilters)->required();
  cmd_filter->add_option("--min-speedup", fl_min_speedup, "Speedup threshold");
  cmd_filter->add_option("--noise-gate", fl_noise_gate, "Dispersion gate");
  cmd_filter->add_flag("--with-compile-time", fl_compile_time,
                       "Add compile time as a third objective");

  // ---- db ----------------------------------------------------------------
  auto* cmd_db = app.add_subcommand("db", "Repository operations");
  cmd_db->require_subcommand(1);
  auto* db_merge = cmd_db->add_subcommand("merge", "Merge one repository into another");
  std::string merge_from = "local", merge_to = "shared";
  db_merge->add_option("--from", merge_from, "Source: local | shared | <path>");
  db_merge->add_option("--to", merge_to, "Destination: local | shared | <path>");
  auto* db_query = cmd_db->add_subcommand("query", "List optimization cases");
  std::string q_program_id, q_platform_id, q_compiler_id;
  double q_min_speedup = 0.0;
  int q_min_rank = 0;
  int q_dataset = 0;
  int q_output_correct = -1;
  db_query->add_option("--program-id", q_program_id);
  db_query->add_option("--platform-id", q_platform_id);
  db_query->add_option("--compiler-id", q_compiler_id);
  db_query->add_option("--min-speedup", q_min_speedup);
  db_query->add_option("--min-rank", q_min_rank);
  db_query->add_option("--dataset", q_dataset);
  db_query->add_option("--output-correct", q_output_correct, "1 or 0");
  auto* db_rank = cmd_db->add_subcommand("rank", "Rank an optimization case by its run id");
  std::string rank_run_id;
  int rank_value = 0;
  db_rank->add_option("run_id", rank_run_id)->required();
  db_rank->add_option("rank", rank_value)->required();
  auto* db_import = cmd_db->add_subcommand("import", "Import off-line packet files");
  std::string import_dir;
  db_import->add_option("dir", import_dir, "Directory of _comp/_run/*.pk files")->required();

  // ---- train / predict / serve -------------------------------------------
  auto* cmd_train = app.add_subcommand("train", "Train a prediction model from the repository");
  std::string tr_compiler, tr_platform, tr_objective = "time", tr_model = "nearest_neighbor";
  std::string tr_out, tr_backend;
  bool tr_loo = false;
  cmd_train->add_option("--compiler-id", tr_compiler)->required();
  cmd_train->add_option("--platform-id", tr_platform)->required();
  cmd_train->add_option("--objective", tr_objective, "time | size | time_and_size");
  cmd_train->add_option("--model", tr_model, "nearest_neighbor | per_flag_probability");
  cmd_train->add_option("--out", tr_out, "Write the model packets to this file");
  cmd_train->add_flag("--loo", tr_loo, "Run leave-one-out evaluation (needs --backend)");
  cmd_train->add_option("--backend", tr_backend, "Backend for --loo evaluation");

  auto* cmd_predict = app.add_subcommand("predict", "Predict flags for a feature vector");
  std::string pr_model_file, pr_service, pr_features, pr_platform, pr_environment, pr_compiler;
  std::string pr_model = "nearest_neighbor", pr_objective = "time";
  cmd_predict->add_option("--model-file", pr_model_file, "Serialized model packets");
  cmd_predict->add_option("--service", pr_service, "host:port of a prediction service");
  cmd_predict->add_option("--features", pr_features, "ft1=..., ft2=...")->required();
  cmd_predict->add_option("--platform-id", pr_platform)->required();
  cmd_predict->add_option("--environment-id", pr_environment);
  cmd_predict->add_option("--compiler-id", pr_compiler)->required();
  cmd_predict->add_option("--model", pr_model);
  cmd_predict->add_option("--objective", pr_objective);

  auto* cmd_serve = app.add_subcommand("serve", "Run the prediction web service");
  std::string serve_bind = "127.0.0.1";
  int serve_port = 8080;
  cmd_serve->add_option("--bind", serve_bind);
  cmd_serve->add_option("--port", serve_port);

  // ---- adapt --------------------------------------------------------------
  auto* cmd_adapt = app.add_subcommand("adapt", "Multiversioning runtime adaptation");
  cmd_adapt->require_subcommand(1);
  auto* adapt_sim = cmd_adapt->add_subcommand("simulate", "Simulate clone selection on a trace");
  std::string sim_program, sim_trace, sim_csv;
  int sim_bins = 8;
  long sim_recal = 1000;
  adapt_sim->add_option("--program", sim_program, "Adaptive program packets")->required();
  adapt_sim->add_option("--trace", sim_trace, "Trace spec packets")->required();
  adapt_sim->add_option("--bins", sim_bins, "Signature quantization bins");
  adapt_sim->add_option("--recalibration-interval", sim_recal, "Steps per signature; 0 disables");
  adapt_sim->add_option("--csv", sim_csv, "Write the per-step series to this file");
  auto* adapt_evolve = cmd_adapt->add_subcommand("evolve", "Replace the worst clones");
  std::string ev_program, ev_out;
  int ev_k = 1;
  adapt_evolve->add_option("--program", ev_program, "Adaptive program packets")->required();
  adapt_evolve->add_option("-k,--replace", ev_k, "How many clones to replace");
  adapt_evolve->add_option("--out", ev_out, "Write the evolved program here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  Cleanup guard;

  if (*cmd_register) {
    guard.repo = open_local(local_db, true);
    if (!guard.repo) return fail("register");
    std::string descriptor = "NAME=" + reg_name + "\n";
    if (!reg_template.empty()) descriptor += "INVOCATION_TEMPLATE=" + reg_template + "\n";
    if (!reg_flag_space.empty()) descriptor += "FLAG_SPACE_REF=" + reg_flag_space + "\n";
    if (!reg_program_dir.empty()) {
      // program entities pick their datasets up from the directory contract
      const std::string info = read_file(reg_program_dir + "/_ccc_info_datasets");
      std::istringstream lines(info);
      std::string line;
      int total = 0;
      lines >> total;
      descriptor += "SOURCE_DIR=" + reg_program_dir + "\n";
      descriptor += "DATASET_COUNT=" + std::to_string(total) + "\n";
      std::getline(lines, line);
      int seen = 0;
      while (seen < total && std::getline(lines, line)) {
        if (line.rfind("====", 0) == 0 || line.empty()) continue;
        const int number = std::atoi(line.c_str());
        std::string command, bound;
        std::getline(lines, command);
        std::getline(lines, bound);
        descriptor += "DATASET_" + std::to_string(number) + "_CMD=" + command + "\n";
        descriptor += "DATASET_" + std::to_string(number) + "_LOOP=" + bound + "\n";
        ++seen;
      }
    }
    std::string id = take(ctune_repo_register(guard.repo, reg_kind.c_str(), descriptor.c_str()));
    if (id.empty()) return fail("register");
    std::printf(packets ? "ID=%s\n" : "%s\n", id.c_str());
    return 0;
  }

  if (*cmd_comp) {
    if (comp_args.empty()) {
      std::fprintf(stderr, "ctune comp: missing compiler name\n");
      return 2;
    }
    const std::string backend_spec = comp_args.front();
    std::vector<std::string> recorded, aux;
    bool after_separator = false;
    for (size_t i = 1; i < comp_args.size(); ++i) {
      if (comp_args[i] == "--") {
        after_separator = true;
      } else {
        (after_separator ? aux : recorded).push_back(comp_args[i]);
      }
    }
    guard.repo = open_local(local_db, true);
    if (!guard.repo) return fail("comp");
    guard.backend = ctune_backend_open(guard.repo, backend_spec.c_str(), workdir.c_str());
    if (!guard.backend) {
      std::fprintf(stderr, "ctune: unknown compiler or backend '%s'\nMESSAGE=%s\n",
                   backend_spec.c_str(), ctune_last_error_message());
      return 1;
    }
    guard.session =
        ctune_session_new(guard.repo, guard.backend, comp_program.c_str(), env_packet().c_str());
    if (!guard.session) return fail("comp");
    std::string packet = take(
        ctune_session_comp(guard.session, join_flags(recorded).c_str(), join_flags(aux).c_str()));
    if (packet.empty()) return fail("comp");
    // remember the backend for the paired run invocation
    std::ofstream marker(workdir + "/_ccc_backend");
    marker << backend_spec << "\n" << comp_program << "\n";
    if (packets) std::fputs((packet + "\n").c_str(), stdout);
    return 0;
  }

  if (*cmd_run) {
    if (run_dataset < 1) {
      std::fprintf(stderr, "ctune run: datasets are numbered from 1\n");
      return 2;
    }
    std::string backend_spec = run_backend_spec;
    std::string program_name = run_program;
    if (backend_spec.empty()) {
      std::ifstream marker(workdir + "/_ccc_backend");
      if (marker) {
        std::getline(marker, backend_spec);
        if (program_name.empty()) std::getline(marker, program_name);
      }
    }
    if (backend_spec.empty()) {
      std::fprintf(stderr, "ctune run: no prior comp in this directory and no --backend\n");
      return 1;
    }
    guard.repo = open_local(local_db, true);
    if (!guard.repo) return fail("run");
    guard.backend = ctune_backend_open(guard.repo, backend_spec.c_str(), workdir.c_str());
    if (!guard.backend) return fail("run");
    guard.session =
        ctune_session_new(guard.repo, guard.backend, program_name.c_str(), env_packet().c_str());
    if (!guard.session) return fail("run");
    std::string packet = take(ctune_session_run(guard.session, run_dataset, run_baseline));
    if (packet.empty()) return fail("run");
    if (packets) std::fputs((packet + "\n").c_str(), stdout);
    else std::printf("OUTPUT_CORRECT=%s\n", packet_value(packet, "OUTPUT_CORRECT").c_str());
    return 0;
  }

  if (*cmd_explore) {
    guard.repo = open_local(local_db, true);
    if (!guard.repo) return fail("explore");
    guard.backend = ctune_backend_open(guard.repo, ex_backend.c_str(), workdir.c_str());
    if (!guard.backend) return fail("explore");
    guard.session =
        ctune_session_new(guard.repo, guard.backend, ex_program.c_str(), env_packet().c_str());
    if (!guard.session) return fail("explore");
    std::string config = "STRATEGY=" + ex_strategy + "\nBUDGET=" + std::to_string(ex_budget) +
                         "\nSEED=" + std::to_string(seed) +
                         "\nPROBABILITY=" + std::to_string(ex_probability) +
                         "\nFIXED_LENGTH=" + std::to_string(ex_fixed) +
                         "\nDATASET=" + std::to_string(ex_dataset) +
                         "\nEPSILON=" + std::to_string(ex_epsilon) + "\n";
    if (runs > 0) config += "REPEATS=" + std::to_string(runs) + "\n";
    if (!ex_reference.empty()) config += "REFERENCE_LEVEL=" + ex_reference + "\n";
    std::string report = take(
        ctune_session_explore(guard.session, read_file(ex_space).c_str(), config.c_str()));
    if (report.empty()) return fail("explore");
    if (packets) {
      std::fputs(report.c_str(), stdout);
    } else {
      std::printf("iterations=%s best_speedup=%s best_flags=%s iterations_to_95pct=%s\n",
                  packet_value(report, "ITERATIONS").c_str(),
                  packet_value(report, "BEST_SPEEDUP").c_str(),
                  packet_value(report, "BEST_OPT_FLAGS").c_str(),
                  packet_value(report, "ITERATIONS_TO_95PCT").c_str());
    }
    return 0;
  }

  if (*cmd_filter) {
    guard.repo = ctune_repo_open(local_db.c_str(), 0);
    if (!guard.repo) return fail("filter");
    std::string cases = take(ctune_repo_query(guard.repo, "SELECT_ALL=1\n"));
    std::string options = "MIN_SPEEDUP=" + std::to_string(fl_min_speedup) +
                          "\nNOISE_GATE=" + std::to_string(fl_noise_gate) + "\n";
    if (fl_compile_time) options += "WITH_COMPILE_TIME=1\n";
    char* result = ctune_filter(fl_name.c_str(), cases.c_str(), options.c_str());
    if (!result) {
      const int code = ctune_last_error();
      std::fprintf(stderr, "ctune: filter failed\nMESSAGE=%s\n", ctune_last_error_message());
      return code == CTUNE_ERR_USAGE ? 2 : 1;
    }
    std::string kept = take(result);
    if (packets) {
      std::fputs(kept.c_str(), stdout);
    } else {
      // one case id per line
      size_t pos = 0;
      while ((pos = kept.find("COMPILE_ID=", pos)) != std::string::npos) {
        size_t end = kept.find('\n', pos);
        std::printf("%s\n", kept.substr(pos + 11, end - pos - 11).c_str());
        pos = end;
      }
    }
    return 0;
  }

  if (*db_merge) {
    auto resolve = [&](const std::string& name) {
      if (name == "local") return local_db;
      if (name == "shared") return shared_db;
      return name;
    };
    ctune_repo* source = ctune_repo_open(resolve(merge_from).c_str(), 0);
    if (!source) return fail("db merge");
    ctune_repo* destination = open_local(resolve(merge_to), true);
    if (!destination) {
      ctune_repo_close(source);
      return fail("db merge");
    }
    uint64_t stats[3] = {0, 0, 0};
    int rc = ctune_repo_merge(source, destination, stats);
    ctune_repo_close(source);
    ctune_repo_close(destination);
    if (rc != CTUNE_OK) return fail("db merge");
    std::printf("new=%llu duplicate=%llu conflicting=%llu\n",
                static_cast<unsigned long long>(stats[0]),
                static_cast<unsigned long long>(stats[1]),
                static_cast<unsigned long long>(stats[2]));
    return 0;
  }

  if (*db_query) {
    guard.repo = ctune_repo_open(local_db.c_str(), 0);
    if (!guard.repo) return fail("db query");
    std::string criteria;
    if (!q_program_id.empty()) criteria += "PROGRAM_ID=" + q_program_id + "\n";
    if (!q_platform_id.empty()) criteria += "PLATFORM_ID=" + q_platform_id + "\n";
    if (!q_compiler_id.empty()) criteria += "COMPILER_ID=" + q_compiler_id + "\n";
    if (q_min_speedup > 0) criteria += "MIN_SPEEDUP=" + std::to_string(q_min_speedup) + "\n";
    if (q_min_rank > 0) criteria += "MIN_RANK=" + std::to_string(q_min_rank) + "\n";
    if (q_dataset > 0) criteria += "DATASET_ID=" + std::to_string(q_dataset) + "\n";
    if (q_output_correct >= 0) {
      criteria += std::string("OUTPUT_CORRECT=") + (q_output_correct ? "1" : "0") + "\n";
    }
    if (criteria.empty()) criteria = "SELECT_ALL=1\n";
    std::string result = take(ctune_repo_query(guard.repo, criteria.c_str()));
    if (result.empty() && ctune_last_error() != CTUNE_OK) return fail("db query");
    std::fputs(result.c_str(), stdout);
    return 0;
  }

  if (*db_rank) {
    guard.repo = open_local(local_db, false);
    if (!guard.repo) return fail("db rank");
    if (ctune_repo_rank(guard.repo, rank_run_id.c_str(), rank_value) != CTUNE_OK) {
      return fail("db rank");
    }
    std::printf("RANK_OF=%s\nRANK=%d\n", rank_run_id.c_str(), rank_value);
    return 0;
  }

  if (*db_import) {
    guard.repo = open_local(local_db, true);
    if (!guard.repo) return fail("db import");
    if (ctune_repo_import(guard.repo, import_dir.c_str()) != CTUNE_OK) return fail("db import");
    std::printf("imported %s\n", import_dir.c_str());
    return 0;
  }

  if (*cmd_train) {
    guard.repo = ctune_repo_open(local_db.c_str(), 0);
    if (!guard.repo) return fail("train");
    std::string options = "COMPILER_ID=" + tr_compiler + "\nPLATFORM_ID=" + tr_platform +
                          "\nOBJECTIVE=" + tr_objective + "\nMODEL=" + tr_model + "\n";
    std::string model = take(ctune_train(guard.repo, options.c_str()));
    if (model.empty()) return fail("train");
    if (!tr_out.empty()) {
      std::ofstream out(tr_out, std::ios::binary);
      out << model;
    } else {
      std::fputs(model.c_str(), stdout);
    }
    if (tr_loo) {
      if (tr_backend.empty()) {
        std::fprintf(stderr, "ctune train --loo needs --backend\n");
        return 2;
      }
      guard.backend = ctune_backend_open(guard.repo, tr_backend.c_str(), workdir.c_str());
      if (!guard.backend) return fail("train");
      std::string loo =
          take(ctune_loo_evaluate(guard.repo, guard.backend, options.c_str()));
      if (loo.empty()) return fail("train");
      std::fputs(loo.c_str(), stdout);
    }
    return 0;
  }

  if (*cmd_predict) {
    std::string query = "PLATFORM_ID=" + pr_platform + "\n";
    if (!pr_environment.empty()) query += "ENVIRONMENT_ID=" + pr_environment + "\n";
    query += "COMPILER_ID=" + pr_compiler + "\nMODEL=" + pr_model +
             "\nOBJECTIVE=" + pr_objective + "\nSTATIC_FEATURE_VECTOR=" + pr_features + "\n";
    std::string response;
    if (!pr_service.empty()) {
      std::string host = pr_service;
      int port = 80;
      if (size_t colon = host.rfind(':'); colon != std::string::npos) {
        port = std::atoi(host.c_str() + colon + 1);
        host = host.substr(0, colon);
      }
      if (size_t scheme = host.find("://"); scheme != std::string::npos) {
        host = host.substr(scheme + 3);
      }
      response = take(ctune_predict_service(host.c_str(), port, query.c_str()));
    } else if (!pr_model_file.empty()) {
      response = take(ctune_predict(read_file(pr_model_file).c_str(), query.c_str()));
    } else {
      std::fprintf(stderr, "ctune predict: one of --model-file or --service is required\n");
      return 2;
    }
    if (response.empty()) return fail("predict");
    if (packets) {
      std::fputs(response.c_str(), stdout);
    } else {
      std::printf("%s\n", packet_value(response, "OPT_FLAGS").c_str());
    }
    return packet_value(response, "STATUS") == "OK" ? 0 : 1;
  }

  if (*cmd_serve) {
    ctune_service* service = ctune_serve_start(local_db.c_str(), serve_bind.c_str(), serve_port);
    if (!service) return fail("serve");
    std::printf("serving POST /predict on %s:%d (repository %s)\n", serve_bind.c_str(),
                ctune_serve_port(service), local_db.c_str());
    std::fflush(stdout);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) {
      struct timespec ts {0, 100000000};
      nanosleep(&ts, nullptr);
    }
    ctune_serve_stop(service);
    return 0;
  }

  if (*adapt_sim) {
    std::string policy = "BINS=" + std::to_string(sim_bins) +
                         "\nRECALIBRATION_INTERVAL=" + std::to_string(sim_recal) + "\n";
    if (!sim_csv.empty()) policy += "CSV=1\n";
    std::string report = take(ctune_adapt_simulate(read_file(sim_program).c_str(),
                                                   read_file(sim_trace).c_str(), policy.c_str()));
    if (report.empty()) return fail("adapt simulate");
    if (!sim_csv.empty()) {
      const size_t marker = report.find("CSV_FILE=inline\n");
      std::ofstream out(sim_csv, std::ios::binary);
      out << report.substr(marker + 16);
      report = report.substr(0, marker);
    }
    if (packets) {
      std::fputs(report.c_str(), stdout);
    } else {
      std::printf("total_time=%s oracle_time=%s regret=%s\n",
                  packet_value(report, "TOTAL_TIME").c_str(),
                  packet_value(report, "ORACLE_TIME").c_str(),
                  packet_value(report, "REGRET").c_str());
    }
    return 0;
  }

  if (*adapt_evolve) {
    guard.repo = ctune_repo_open(local_db.c_str(), 0);
    if (!guard.repo) return fail("adapt evolve");
    std::string evolved =
        take(ctune_adapt_evolve(guard.repo, read_file(ev_program).c_str(), ev_k));
    if (evolved.empty()) return fail("adapt evolve");
    if (!ev_out.empty()) {
      std::ofstream out(ev_out, std::ios::binary);
      out << evolved;
    } else {
      std::fputs(evolved.c_str(), stdout);
    }
    return 0;
  }

  return 2;
}
