/* ctune C API: opaque handles over the tuning core. All multi-field inputs
 * and outputs travel as packet-format text (KEY=VALUE lines, blank line
 * between packets). Functions returning pointers yield NULL on failure;
 * functions returning int yield a CTUNE_* code. ctune_last_error_message()
 * describes the most recent failure on the calling thread. Strings returned
 * by the library are heap-allocated; release them with ctune_free(). */

#ifndef CTUNE_H
#define CTUNE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  CTUNE_OK = 0,
  CTUNE_ERR_USAGE = 1,
  CTUNE_ERR_FORMAT = 2,      /* malformed packet text or values */
  CTUNE_ERR_STORAGE = 3,     /* repository io, locking, versioning */
  CTUNE_ERR_REFERENCE = 4,   /* dangling ids, unknown cases */
  CTUNE_ERR_DRIVER = 5,      /* compile/run failures, timeouts */
  CTUNE_ERR_DATA = 6,        /* insufficient or mismatched model data */
  CTUNE_ERR_INTERNAL = 7
};

typedef struct ctune_repo ctune_repo;
typedef struct ctune_backend ctune_backend;
typedef struct ctune_session ctune_session;
typedef struct ctune_service ctune_service;

const char* ctune_version(void);
void ctune_free(char* text);

int ctune_last_error(void);
/* Valid until the next ctune call on this thread. */
const char* ctune_last_error_message(void);

/* ---- repository ------------------------------------------------------- */

ctune_repo* ctune_repo_open(const char* path, int writable);
ctune_repo* ctune_repo_create(const char* path, const char* options_packet);
void ctune_repo_close(ctune_repo* repo);

/* INFORMATION packet. */
char* ctune_repo_info(ctune_repo* repo);

/* kind: platform | environment | compiler | program | runtime.
 * Returns the entity id as a decimal string. */
char* ctune_repo_register(ctune_repo* repo, const char* kind, const char* descriptor_packet);

/* Records a stream of compilation / execution / feature packets; returns the
 * number of records stored. */
int ctune_repo_record(ctune_repo* repo, const char* packets_text, size_t* recorded);

/* Criteria packet keys: SELECT_ALL, PROGRAM_ID, PLATFORM_ID, COMPILER_ID,
 * DATASET_ID, MIN_SPEEDUP, MIN_RANK, OUTPUT_CORRECT.
 * Returns one case summary packet per optimization case. */
char* ctune_repo_query(ctune_repo* repo, const char* criteria_packet);

int ctune_repo_merge(ctune_repo* source, ctune_repo* destination, uint64_t stats_out[3]);
int ctune_repo_rank(ctune_repo* repo, const char* run_id, int rank);
int ctune_repo_import(ctune_repo* repo, const char* directory);

/* ---- backends and sessions -------------------------------------------- */

/* spec: "synthetic:<sprog file>" or "real:<registered compiler name>".
 * A real backend resolves its compiler descriptor from the repository. */
ctune_backend* ctune_backend_open(ctune_repo* repo, const char* spec, const char* workdir);
void ctune_backend_close(ctune_backend* backend);

/* env packet keys: RUNS, SEED, NOTES, OPT_PLATFORM, PROCESSOR_NUM,
 * AGGREGATOR (min|median|mean), DATE, TIME, COMPILE_TIMEOUT, RUN_TIMEOUT,
 * RUN_RE, LOOP_WRAPPER. Unset keys fall back to the CCC_* environment. */
ctune_session* ctune_session_new(ctune_repo* repo, ctune_backend* backend,
                                 const char* program_name, const char* env_packet);
void ctune_session_close(ctune_session* session);

/* ccc-comp: returns the _comp packet text (plus a features packet when the
 * backend produced one). */
char* ctune_session_comp(ctune_session* session, const char* opt_flags, const char* aux_flags);

/* ccc-run: returns the _run packet text. A baseline run records the
 * reference; later runs validate against it. */
char* ctune_session_run(ctune_session* session, int dataset, int is_baseline);

/* config packet keys: STRATEGY (glob-flags-rnd-uniform | glob-flags-rnd-fixed
 * | glob-flags-one-by-one | glob-flags-one-off-rnd), BUDGET, SEED,
 * PROBABILITY, FIXED_LENGTH, REPEATS, DATASET, REFERENCE_LEVEL, EPSILON.
 * space_text is a flag-space packet stream (one FLAG= line per packet).
 * Returns the exploration report as packets. */
char* ctune_session_explore(ctune_session* session, const char* space_text,
                            const char* config_packet);

/* ---- filters ----------------------------------------------------------- */

/* name: get-all-best-flags-time | get-all-best-flags-time-size-pareto.
 * cases_text is a stream of case summary packets (as produced by
 * ctune_repo_query); options packet keys: MIN_SPEEDUP, NOISE_GATE,
 * WITH_COMPILE_TIME. */
char* ctune_filter(const char* name, const char* cases_text, const char* options_packet);

/* (max-min)/median noise assessment; times_text is whitespace-separated. */
char* ctune_assess_noise(const char* times_text, const char* aggregator);

/* ---- prediction -------------------------------------------------------- */

/* options packet keys: COMPILER_ID, PLATFORM_ID, OBJECTIVE, MODEL.
 * Returns the serialized model. */
char* ctune_train(ctune_repo* repo, const char* options_packet);

/* Local prediction against a serialized model; the query uses the service
 * wire grammar. Returns a response packet (STATUS=OK | error). */
char* ctune_predict(const char* model_text, const char* query_packet);

/* Leave-one-out evaluation; options packet keys: MODEL, OBJECTIVE. */
char* ctune_loo_evaluate(ctune_repo* repo, ctune_backend* backend, const char* options_packet);

/* Serves POST /predict on bind_address:port (port 0 picks one). */
ctune_service* ctune_serve_start(const char* repo_path, const char* bind_address, int port);
int ctune_serve_port(ctune_service* service);
void ctune_serve_stop(ctune_service* service);

/* Client for a running service; returns the response packet. */
char* ctune_predict_service(const char* host, int port, const char* query_packet);

/* ---- runtime adaptation ------------------------------------------------ */

/* program_text: ADAPTIVE_PROGRAM_ID/CLONE_ID packets; trace_text: TRACE_SEED
 * + PHASE_ID packets; policy packet keys: BINS, RECALIBRATION_INTERVAL.
 * Returns the simulation report (add CSV=1 to the policy packet to append a
 * CSV_FILE payload packet with the per-step series). */
char* ctune_adapt_simulate(const char* program_text, const char* trace_text,
                           const char* policy_packet);

/* Replaces the k worst clones using the repository frontier. */
char* ctune_adapt_evolve(ctune_repo* repo, const char* program_text, int k);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CTUNE_H */
