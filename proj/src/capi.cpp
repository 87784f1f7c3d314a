#include "bridge/bridge.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bridge/constraints.hpp"
#include "bridge/correlator.hpp"
#include "bridge/dependency.hpp"
#include "bridge/error.hpp"
#include "bridge/monitor.hpp"
#include "bridge/pinn.hpp"
#include "bridge/plant.hpp"
#include "bridge/trace.hpp"

struct bridge_sim {
  bridge::SimOutput output;
};

struct bridge_constraints {
  bridge::ConstraintModel model;
};

struct bridge_monitor {
  // Keeps the model alive for the monitor's reference.
  std::shared_ptr<const bridge::ConstraintModel> model;
  std::unique_ptr<bridge::StreamMonitor> monitor;
};

struct bridge_pinn {
  bridge::PinnModel model;
};

namespace {

thread_local std::string g_last_error;

bridge_status fail(bridge_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
bridge_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return BRIDGE_OK;
  } catch (const bridge::Error& e) {
    return fail(static_cast<bridge_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(BRIDGE_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BRIDGE_E_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string alerts_jsonl(const std::vector<bridge::ScadaAlert>& alerts) {
  std::string out;
  for (const auto& a : alerts) out += bridge::alert_to_jsonl(a) + "\n";
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bridge::Error(bridge::ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw bridge::Error(bridge::ErrorCode::io, "cannot write '" + path + "'");
  out << text;
}

bridge::MonitorOptions monitor_options(double tol, bridge_reference_mode mode) {
  bridge::MonitorOptions o;
  o.tol = tol;
  o.reference = mode == BRIDGE_REFERENCE_MODEL ? bridge::ReferenceMode::model
                                                : bridge::ReferenceMode::stream;
  return o;
}

#define REQUIRE_ARG(cond)                                               \
  do {                                                                  \
    if (!(cond)) return fail(BRIDGE_E_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

}  // namespace

extern "C" {

const char* bridge_version(void) { return "0.1.0"; }

const char* bridge_last_error(void) { return g_last_error.c_str(); }

const char* bridge_status_name(bridge_status status) {
  switch (status) {
    case BRIDGE_OK: return "ok";
    case BRIDGE_E_ARGUMENT: return "argument";
    case BRIDGE_E_PARSE: return "parse";
    case BRIDGE_E_ORDERING: return "ordering";
    case BRIDGE_E_CONFIG: return "config";
    case BRIDGE_E_INSUFFICIENT_DATA: return "insufficient_data";
    case BRIDGE_E_DEGENERATE_DATA: return "degenerate_data";
    case BRIDGE_E_SHAPE: return "shape";
    case BRIDGE_E_NUMERIC: return "numeric";
    case BRIDGE_E_IO: return "io";
    case BRIDGE_E_SIMULATION: return "simulation";
    case BRIDGE_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void bridge_string_free(char* text) { std::free(text); }

bridge_status bridge_simulate(const char* scenario_path, const char* attack_path, uint64_t seed,
                              bridge_sim** out) {
  REQUIRE_ARG(out != nullptr);
  *out = nullptr;
  return guarded([&] {
    bridge::ScenarioConfig cfg =
        scenario_path != nullptr ? bridge::load_scenario(scenario_path) : bridge::dosing_scenario();
    cfg.seed = seed;
    std::optional<bridge::AttackSpec> attack;
    if (attack_path != nullptr) attack = bridge::load_attack(attack_path);
    auto sim = std::make_unique<bridge_sim>();
    sim->output = bridge::simulate(cfg, attack);
    *out = sim.release();
  });
}

bridge_status bridge_sim_write(const bridge_sim* sim, const char* trace_path,
                               const char* series_path, const char* labels_path) {
  REQUIRE_ARG(sim != nullptr);
  return guarded([&] {
    if (trace_path != nullptr) bridge::write_trace_file(trace_path, sim->output.trace);
    if (series_path != nullptr) bridge::write_series_file(series_path, sim->output.series);
    if (labels_path != nullptr) write_text(labels_path, bridge::labels_to_json(sim->output.labels) + "\n");
  });
}

bridge_status bridge_sim_summary(const bridge_sim* sim, char** json) {
  REQUIRE_ARG(sim != nullptr && json != nullptr);
  return guarded([&] {
    const auto& o = sim->output;
    nlohmann::ordered_json j;
    j["scenario"] = o.config.name;
    j["seed"] = o.config.seed;
    if (o.attack) {
      j["attack"] = bridge::to_string(o.attack->category);
    } else {
      j["attack"] = nullptr;
    }
    j["commands"] = o.trace.commands.size();
    j["frames"] = o.series.size();
    j["cycles"] = o.cycle_starts.size();
    j["labels"] = nlohmann::ordered_json::parse(bridge::labels_to_json(o.labels));
    *json = dup_string(j.dump());
  });
}

void bridge_sim_free(bridge_sim* sim) { delete sim; }

bridge_status bridge_extract(const char* trace_path, bridge_graph_format format, char** text) {
  REQUIRE_ARG(trace_path != nullptr && text != nullptr);
  return guarded([&] {
    const auto trace = bridge::read_trace_file(trace_path);
    const auto events = bridge::EventSet::from_commands(trace.commands);
    const auto graph = bridge::build_graph(bridge::segment_operations(trace.commands, events));
    *text = dup_string(format == BRIDGE_GRAPH_DOT ? bridge::graph_to_dot(graph)
                                                  : bridge::graph_to_json(graph));
  });
}

bridge_status bridge_constraints_learn(const char* const* trace_paths, size_t count,
                                       int use_epsilon, bridge_constraints** out) {
  REQUIRE_ARG(trace_paths != nullptr && count > 0 && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    std::vector<bridge::ProcessControlOperation> ops;
    std::vector<std::string> warnings;
    for (size_t i = 0; i < count; ++i) {
      if (trace_paths[i] == nullptr) throw bridge::Error(bridge::ErrorCode::config, "null trace path");
      const auto trace = bridge::read_trace_file(trace_paths[i]);
      auto part = bridge::segment_operations(
          trace.commands, bridge::EventSet::from_commands(trace.commands), &warnings);
      ops.insert(ops.end(), part.begin(), part.end());
    }
    bridge::ConstraintOptions options;
    options.use_epsilon = use_epsilon != 0;
    auto m = std::make_unique<bridge_constraints>();
    m->model = bridge::build_constraint_model(ops, options);
    m->model.warnings.insert(m->model.warnings.end(), warnings.begin(), warnings.end());
    *out = m.release();
  });
}

bridge_status bridge_constraints_load(const char* path, bridge_constraints** out) {
  REQUIRE_ARG(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<bridge_constraints>();
    m->model = bridge::load_model(path);
    *out = m.release();
  });
}

bridge_status bridge_constraints_save(const bridge_constraints* model, const char* path) {
  REQUIRE_ARG(model != nullptr && path != nullptr);
  return guarded([&] { bridge::save_model(path, model->model); });
}

bridge_status bridge_constraints_to_json(const bridge_constraints* model, char** json) {
  REQUIRE_ARG(model != nullptr && json != nullptr);
  return guarded([&] { *json = dup_string(bridge::model_to_json(model->model)); });
}

void bridge_constraints_free(bridge_constraints* model) { delete model; }

bridge_status bridge_monitor_new(const bridge_constraints* model, double tol,
                                 bridge_reference_mode mode, bridge_monitor** out) {
  REQUIRE_ARG(model != nullptr && out != nullptr && tol > 0.0);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<bridge_monitor>();
    m->model = std::make_shared<const bridge::ConstraintModel>(model->model);
    m->monitor = std::make_unique<bridge::StreamMonitor>(*m->model, bridge::EventSet{},
                                                         monitor_options(tol, mode));
    *out = m.release();
  });
}

bridge_status bridge_monitor_push(bridge_monitor* monitor, const char* line, char** alerts) {
  REQUIRE_ARG(monitor != nullptr && line != nullptr && alerts != nullptr);
  *alerts = nullptr;
  return guarded([&] {
    std::istringstream in(line);
    const auto trace = bridge::read_trace(in);
    std::vector<bridge::ScadaAlert> out;
    const std::size_t errors_before = monitor->monitor->errors().size();
    for (const auto& c : trace.commands) {
      auto a = monitor->monitor->push(c);
      out.insert(out.end(), a.begin(), a.end());
    }
    const auto& errors = monitor->monitor->errors();
    if (errors.size() > errors_before) {
      throw bridge::Error(bridge::ErrorCode::ordering, errors.back());
    }
    *alerts = dup_string(alerts_jsonl(out));
  });
}

bridge_status bridge_monitor_finish(bridge_monitor* monitor, char** alerts) {
  REQUIRE_ARG(monitor != nullptr && alerts != nullptr);
  *alerts = nullptr;
  return guarded([&] { *alerts = dup_string(alerts_jsonl(monitor->monitor->finish())); });
}

void bridge_monitor_free(bridge_monitor* monitor) { delete monitor; }

bridge_status bridge_monitor_file(const bridge_constraints* model, const char* trace_path,
                                  double tol, bridge_reference_mode mode, char** alerts) {
  REQUIRE_ARG(model != nullptr && trace_path != nullptr && alerts != nullptr && tol > 0.0);
  *alerts = nullptr;
  return guarded([&] {
    const auto trace = bridge::read_trace_file(trace_path);
    const auto found = bridge::check_trace(trace.commands,
                                           bridge::EventSet::from_commands(trace.commands),
                                           model->model, monitor_options(tol, mode));
    *alerts = dup_string(alerts_jsonl(found));
  });
}

void bridge_pinn_config_default(bridge_pinn_config* config) {
  if (config == nullptr) return;
  const bridge::PinnHyper h;
  config->seq_len = h.seq_len;
  config->omega = h.omega;
  config->alpha = h.weights.alpha;
  config->beta = h.weights.beta;
  config->gamma = h.weights.gamma;
  config->learning_rate = h.learning_rate;
  config->epochs = h.epochs;
  config->batch_size = h.batch_size;
  config->holdout = h.holdout;
  config->seed = h.seed;
}

bridge_status bridge_pinn_train(const char* series_path, const bridge_pinn_config* config,
                                bridge_pinn** out) {
  REQUIRE_ARG(series_path != nullptr && config != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    bridge::PinnHyper h;
    h.seq_len = config->seq_len;
    h.omega = config->omega;
    h.weights = {config->alpha, config->beta, config->gamma};
    h.learning_rate = config->learning_rate;
    h.epochs = config->epochs;
    h.batch_size = config->batch_size;
    h.holdout = config->holdout;
    h.seed = config->seed;
    const auto series = bridge::parse_series(series_path);
    auto m = std::make_unique<bridge_pinn>();
    m->model = bridge::train(bridge::make_sequences(series, h.seq_len), h);
    *out = m.release();
  });
}

bridge_status bridge_pinn_load(const char* path, bridge_pinn** out) {
  REQUIRE_ARG(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<bridge_pinn>();
    m->model = bridge::load_pinn(path);
    *out = m.release();
  });
}

bridge_status bridge_pinn_save(const bridge_pinn* model, const char* path) {
  REQUIRE_ARG(model != nullptr && path != nullptr);
  return guarded([&] { bridge::save_pinn(path, model->model); });
}

bridge_status bridge_pinn_theta(const bridge_pinn* model, double* theta) {
  REQUIRE_ARG(model != nullptr && theta != nullptr);
  *theta = model->model.theta;
  return BRIDGE_OK;
}

bridge_status bridge_pinn_history(const bridge_pinn* model, char** json) {
  REQUIRE_ARG(model != nullptr && json != nullptr);
  return guarded([&] {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& e : model->model.history) {
      j.push_back({{"epoch", e.epoch},
                   {"total", e.objective.total},
                   {"mse", e.objective.mse},
                   {"kl", e.objective.kl},
                   {"pde", e.objective.pde}});
    }
    *json = dup_string(j.dump());
  });
}

bridge_status bridge_pinn_score(const bridge_pinn* model, const char* series_path,
                                char** windows_jsonl, char** warnings) {
  REQUIRE_ARG(model != nullptr && series_path != nullptr && windows_jsonl != nullptr);
  *windows_jsonl = nullptr;
  if (warnings != nullptr) *warnings = nullptr;
  return guarded([&] {
    std::vector<std::string> notes;
    const auto windows = bridge::score(model->model, bridge::parse_series(series_path), &notes);
    *windows_jsonl = dup_string(bridge::windows_to_jsonl(windows));
    if (warnings != nullptr) {
      std::string text;
      for (const auto& n : notes) text += n + "\n";
      *warnings = dup_string(text);
    }
  });
}

void bridge_pinn_free(bridge_pinn* model) { delete model; }

bridge_status bridge_derive_itb(const char* trace_path, const char* series_path, double delta,
                                char** profile_json) {
  REQUIRE_ARG(trace_path != nullptr && series_path != nullptr && profile_json != nullptr);
  REQUIRE_ARG(delta > 0.0 && delta < 1.0);
  *profile_json = nullptr;
  return guarded([&] {
    const auto trace = bridge::read_trace_file(trace_path);
    bridge::InertiaOptions o;
    o.delta = delta;
    o.scan_cycles_per_second = trace.header.scan_cycles_per_second;
    const auto profile = bridge::derive_inertia(bridge::parse_series(series_path), trace.commands, o);
    *profile_json = dup_string(bridge::profile_to_json(profile));
  });
}

bridge_status bridge_correlate(const char* alerts_path, const char* windows_path,
                               const char* profile_path, const char* series_path, int cap,
                               double delta_ss, double scan_cycles_per_second,
                               char** verdicts_jsonl) {
  REQUIRE_ARG(alerts_path != nullptr && windows_path != nullptr && profile_path != nullptr);
  REQUIRE_ARG(series_path != nullptr && verdicts_jsonl != nullptr);
  REQUIRE_ARG(cap >= 1 && delta_ss > 0.0 && scan_cycles_per_second > 0.0);
  *verdicts_jsonl = nullptr;
  return guarded([&] {
    bridge::CorrelationOptions o;
    o.cap = cap;
    o.delta_ss = delta_ss;
    o.scan_cycles_per_second = scan_cycles_per_second;
    const auto verdicts = bridge::correlate(
        bridge::read_alerts(alerts_path), bridge::read_windows(windows_path),
        bridge::profile_from_json(read_text(profile_path)), bridge::parse_series(series_path), o);
    std::string text;
    for (const auto& v : verdicts) text += bridge::verdict_to_jsonl(v) + "\n";
    *verdicts_jsonl = dup_string(text);
  });
}

bridge_status bridge_report(const char* verdicts_path, char** markdown) {
  REQUIRE_ARG(verdicts_path != nullptr && markdown != nullptr);
  *markdown = nullptr;
  return guarded([&] {
    *markdown = dup_string(bridge::render_report(bridge::read_verdicts(verdicts_path)));
  });
}

}  // extern "C"
