#ifndef BRIDGE_BRIDGE_H
#define BRIDGE_BRIDGE_H

/*
 * C interface to the bridge library: SCADA dependency constraints, the
 * inertial plant simulator, the physics-informed autoencoder and the
 * cause-before-effect correlator.
 *
 * Every function returns a bridge_status. On failure the message is available
 * from bridge_last_error() on the calling thread until the next call.
 * Strings returned through char** outputs are owned by the caller and must be
 * released with bridge_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BRIDGE_BUILDING_LIBRARY)
#    define BRIDGE_API __declspec(dllexport)
#  else
#    define BRIDGE_API __declspec(dllimport)
#  endif
#else
#  define BRIDGE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bridge_status {
  BRIDGE_OK = 0,
  BRIDGE_E_ARGUMENT = 1,
  BRIDGE_E_PARSE = 2,
  BRIDGE_E_ORDERING = 3,
  BRIDGE_E_CONFIG = 4,
  BRIDGE_E_INSUFFICIENT_DATA = 5,
  BRIDGE_E_DEGENERATE_DATA = 6,
  BRIDGE_E_SHAPE = 7,
  BRIDGE_E_NUMERIC = 8,
  BRIDGE_E_IO = 9,
  BRIDGE_E_SIMULATION = 10,
  BRIDGE_E_INTERNAL = 99
} bridge_status;

typedef enum bridge_graph_format { BRIDGE_GRAPH_JSON = 0, BRIDGE_GRAPH_DOT = 1 } bridge_graph_format;

typedef enum bridge_reference_mode {
  BRIDGE_REFERENCE_STREAM = 0,
  BRIDGE_REFERENCE_MODEL = 1
} bridge_reference_mode;

typedef struct bridge_sim bridge_sim;
typedef struct bridge_constraints bridge_constraints;
typedef struct bridge_monitor bridge_monitor;
typedef struct bridge_pinn bridge_pinn;

BRIDGE_API const char* bridge_version(void);
BRIDGE_API const char* bridge_last_error(void);
BRIDGE_API const char* bridge_status_name(bridge_status status);
BRIDGE_API void bridge_string_free(char* text);

/* Simulation. scenario_path NULL selects the built-in dosing scenario;
 * attack_path NULL gives a benign run. */
BRIDGE_API bridge_status bridge_simulate(const char* scenario_path, const char* attack_path,
                                         uint64_t seed, bridge_sim** out);
/* Any of the paths may be NULL to skip that artifact. */
BRIDGE_API bridge_status bridge_sim_write(const bridge_sim* sim, const char* trace_path,
                                          const char* series_path, const char* labels_path);
BRIDGE_API bridge_status bridge_sim_summary(const bridge_sim* sim, char** json);
BRIDGE_API void bridge_sim_free(bridge_sim* sim);

/* Dependency graph of a trace file. */
BRIDGE_API bridge_status bridge_extract(const char* trace_path, bridge_graph_format format,
                                        char** text);

/* Constraint model learned from one or more benign traces. */
BRIDGE_API bridge_status bridge_constraints_learn(const char* const* trace_paths, size_t count,
                                                  int use_epsilon, bridge_constraints** out);
BRIDGE_API bridge_status bridge_constraints_load(const char* path, bridge_constraints** out);
BRIDGE_API bridge_status bridge_constraints_save(const bridge_constraints* model, const char* path);
BRIDGE_API bridge_status bridge_constraints_to_json(const bridge_constraints* model, char** json);
BRIDGE_API void bridge_constraints_free(bridge_constraints* model);

/* Streaming monitor. Each push takes one trace JSONL line and returns the
 * alerts it decided as JSONL (possibly empty). */
BRIDGE_API bridge_status bridge_monitor_new(const bridge_constraints* model, double tol,
                                            bridge_reference_mode mode, bridge_monitor** out);
BRIDGE_API bridge_status bridge_monitor_push(bridge_monitor* monitor, const char* line,
                                             char** alerts_jsonl);
BRIDGE_API bridge_status bridge_monitor_finish(bridge_monitor* monitor, char** alerts_jsonl);
BRIDGE_API void bridge_monitor_free(bridge_monitor* monitor);
/* Batch check of a whole trace file; alerts sorted by time. */
BRIDGE_API bridge_status bridge_monitor_file(const bridge_constraints* model, const char* trace_path,
                                             double tol, bridge_reference_mode mode,
                                             char** alerts_jsonl);

typedef struct bridge_pinn_config {
  int seq_len;        /* inertia time block */
  double omega;       /* inertia delay, seconds */
  double alpha;
  double beta;
  double gamma;
  double learning_rate;
  int epochs;
  int batch_size;
  double holdout;
  uint64_t seed;
} bridge_pinn_config;

BRIDGE_API void bridge_pinn_config_default(bridge_pinn_config* config);
BRIDGE_API bridge_status bridge_pinn_train(const char* series_path, const bridge_pinn_config* config,
                                           bridge_pinn** out);
BRIDGE_API bridge_status bridge_pinn_load(const char* path, bridge_pinn** out);
BRIDGE_API bridge_status bridge_pinn_save(const bridge_pinn* model, const char* path);
BRIDGE_API bridge_status bridge_pinn_theta(const bridge_pinn* model, double* theta);
/* Per-epoch losses as a JSON array. */
BRIDGE_API bridge_status bridge_pinn_history(const bridge_pinn* model, char** json);
/* Scored windows as JSONL; warnings (if non-NULL) receives a newline-separated list. */
BRIDGE_API bridge_status bridge_pinn_score(const bridge_pinn* model, const char* series_path,
                                           char** windows_jsonl, char** warnings);
BRIDGE_API void bridge_pinn_free(bridge_pinn* model);

/* Inertia profile JSON derived from a trace and its series. */
BRIDGE_API bridge_status bridge_derive_itb(const char* trace_path, const char* series_path,
                                           double delta, char** profile_json);

/* Verdict JSONL from alerts, scored windows, an inertia profile and the series. */
BRIDGE_API bridge_status bridge_correlate(const char* alerts_path, const char* windows_path,
                                          const char* profile_path, const char* series_path,
                                          int cap, double delta_ss, double scan_cycles_per_second,
                                          char** verdicts_jsonl);

/* Markdown summary of a verdict file. */
BRIDGE_API bridge_status bridge_report(const char* verdicts_path, char** markdown);

#ifdef __cplusplus
}
#endif

#endif
