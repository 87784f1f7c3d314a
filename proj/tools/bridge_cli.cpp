// Command-line front end. Talks to the library only through bridge.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bridge/bridge.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct DataError {
  int code;
};

void check(bridge_status status, const char* what) {
  if (status == BRIDGE_OK) return;
  std::cerr << "error: " << what << ": " << bridge_last_error() << " ("
            << bridge_status_name(status) << ")\n";
  throw DataError{status == BRIDGE_E_ARGUMENT ? kExitUsage : kExitData};
}

// Owns a string returned by the library.
class Text {
 public:
  Text() = default;
  Text(const Text&) = delete;
  Text& operator=(const Text&) = delete;
  ~Text() { bridge_string_free(ptr_); }
  char** out() { return &ptr_; }
  std::string str() const { return ptr_ != nullptr ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    throw DataError{kExitData};
  }
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};

using SimHandle = Handle<bridge_sim, bridge_sim_free>;
using ConstraintHandle = Handle<bridge_constraints, bridge_constraints_free>;
using MonitorHandle = Handle<bridge_monitor, bridge_monitor_free>;
using PinnHandle = Handle<bridge_pinn, bridge_pinn_free>;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCADA control-dependency monitor with a physics-informed process model", "bridge"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML file with defaults; command-line flags take precedence");
  app.set_version_flag("--version", std::string(bridge_version()));
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the plant simulator and write trace, series and labels");
  std::string sim_scenario, sim_attack, sim_out = "run";
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--scenario", sim_scenario, "scenario JSON (built-in dosing plant when omitted)")
      ->check(CLI::ExistingFile);
  sim->add_option("--attack", sim_attack, "attack JSON (benign run when omitted)")->check(CLI::ExistingFile);
  sim->add_option("--seed", sim_seed, "random seed")->required();
  sim->add_option("--out", sim_out, "output prefix: PREFIX.trace.jsonl, PREFIX.series.csv, PREFIX.labels.json");

  // extract
  auto* ext = app.add_subcommand("extract", "Extract the read-before-write dependency graph of a trace");
  std::string ext_trace, ext_format = "json", ext_out;
  ext->add_option("--trace", ext_trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  ext->add_option("--format", ext_format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  ext->add_option("--out", ext_out, "output path (stdout when omitted)");

  // learn-constraints
  auto* learn = app.add_subcommand("learn-constraints", "Learn relative-dependency constraints from benign traces");
  std::vector<std::string> learn_traces;
  std::string learn_out = "constraints.json";
  bool learn_no_epsilon = false;
  learn->add_option("--trace", learn_traces, "benign trace JSONL (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  learn->add_flag("--no-epsilon", learn_no_epsilon, "use a zero degree of dependency in the time constraint");
  learn->add_option("--out", learn_out, "constraint model JSON");

  // monitor
  auto* mon = app.add_subcommand("monitor", "Check a trace against learned constraints");
  std::string mon_constraints, mon_trace, mon_out = "alerts.jsonl", mon_reference = "stream";
  double mon_tol = 1.0;
  bool mon_batch = false;
  mon->add_option("--constraints", mon_constraints, "constraint model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  mon->add_option("--trace", mon_trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  mon->add_option("--tol", mon_tol, "tolerance multiplier on each constraint")
      ->check(CLI::PositiveNumber);
  mon->add_option("--reference", mon_reference, "interval reference: stream or model")
      ->check(CLI::IsMember({"stream", "model"}));
  mon->add_flag("--batch", mon_batch, "check whole operations instead of streaming line by line");
  mon->add_option("--out", mon_out, "alerts JSONL");

  // train-pinn
  auto* trn = app.add_subcommand("train-pinn", "Train the physics-informed autoencoder on a benign series");
  bridge_pinn_config cfg;
  bridge_pinn_config_default(&cfg);
  std::string trn_series, trn_profile, trn_out = "pinn.json", trn_history;
  std::optional<std::uint64_t> trn_seed;
  std::optional<int> trn_seq;
  std::optional<double> trn_omega;
  trn->add_option("--series", trn_series, "benign series CSV")->required()->check(CLI::ExistingFile);
  trn->add_option("--profile", trn_profile, "inertia profile JSON supplying sequence length and omega")
      ->check(CLI::ExistingFile);
  trn->add_option("--seq-len", trn_seq, "sequence length (default: profile itb, else " +
                                            std::to_string(cfg.seq_len) + ")");
  trn->add_option("--omega", trn_omega, "inertia delay in seconds (default: profile, else " +
                                            std::to_string(cfg.omega) + ")");
  trn->add_option("--alpha", cfg.alpha, "reconstruction weight");
  trn->add_option("--beta", cfg.beta, "KL weight");
  trn->add_option("--gamma", cfg.gamma, "inertial residual weight");
  trn->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  trn->add_option("--epochs", cfg.epochs, "training epochs");
  trn->add_option("--batch-size", cfg.batch_size, "minibatch size");
  trn->add_option("--holdout", cfg.holdout, "tail fraction held out for the threshold");
  trn->add_option("--seed", trn_seed, "random seed")->required();
  trn->add_option("--out", trn_out, "model JSON");
  trn->add_option("--history", trn_history, "write per-epoch losses as JSON");

  // score
  auto* scr = app.add_subcommand("score", "Score every window of a series with a trained model");
  std::string scr_model, scr_series, scr_out = "windows.jsonl";
  scr->add_option("--model", scr_model, "model JSON")->required()->check(CLI::ExistingFile);
  scr->add_option("--series", scr_series, "series CSV")->required()->check(CLI::ExistingFile);
  scr->add_option("--out", scr_out, "scored windows JSONL");

  // derive-itb
  auto* itb = app.add_subcommand("derive-itb", "Derive the inertia delay and time block from commands and series");
  std::string itb_trace, itb_series, itb_out = "profile.json";
  double itb_delta = 0.05;
  itb->add_option("--trace", itb_trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  itb->add_option("--series", itb_series, "series CSV")->required()->check(CLI::ExistingFile);
  itb->add_option("--delta", itb_delta, "rate decay threshold")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  itb->add_option("--out", itb_out, "profile JSON");

  // correlate
  auto* cor = app.add_subcommand("correlate", "Join SCADA alerts with process anomalies");
  std::string cor_alerts, cor_windows, cor_profile, cor_series, cor_out = "verdicts.jsonl";
  int cor_cap = 6;
  double cor_delta_ss = 0.01, cor_rate = 1000.0;
  cor->add_option("--alerts", cor_alerts, "alerts JSONL")->required()->check(CLI::ExistingFile);
  cor->add_option("--windows", cor_windows, "scored windows JSONL")->required()->check(CLI::ExistingFile);
  cor->add_option("--profile", cor_profile, "inertia profile JSON")->required()->check(CLI::ExistingFile);
  cor->add_option("--series", cor_series, "series CSV")->required()->check(CLI::ExistingFile);
  cor->add_option("--cap", cor_cap, "maximum time blocks in the evolution window")
      ->check(CLI::PositiveNumber);
  cor->add_option("--delta-ss", cor_delta_ss, "steady-state threshold as a fraction of each tag's range")
      ->check(CLI::PositiveNumber);
  cor->add_option("--scan-rate", cor_rate, "scan cycles per second of the alert timestamps")
      ->check(CLI::PositiveNumber);
  cor->add_option("--out", cor_out, "verdicts JSONL");

  // report
  auto* rep = app.add_subcommand("report", "Render verdicts as a Markdown summary for operators");
  std::string rep_verdicts, rep_out;
  rep->add_option("--verdicts", rep_verdicts, "verdicts JSONL")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "output path (stdout when omitted)");

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      SimHandle h;
      check(bridge_simulate(sim_scenario.empty() ? nullptr : sim_scenario.c_str(),
                            sim_attack.empty() ? nullptr : sim_attack.c_str(), *sim_seed, &h.ptr),
            "simulate");
      const std::string trace = sim_out + ".trace.jsonl";
      const std::string series = sim_out + ".series.csv";
      const std::string labels = sim_out + ".labels.json";
      check(bridge_sim_write(h.ptr, trace.c_str(), series.c_str(), labels.c_str()), "write");
      Text summary;
      check(bridge_sim_summary(h.ptr, summary.out()), "summary");
      emit("", summary.str());
    } else if (ext->parsed()) {
      Text graph;
      check(bridge_extract(ext_trace.c_str(), ext_format == "dot" ? BRIDGE_GRAPH_DOT : BRIDGE_GRAPH_JSON,
                           graph.out()),
            "extract");
      emit(ext_out, graph.str());
    } else if (learn->parsed()) {
      std::vector<const char*> paths;
      for (const auto& t : learn_traces) paths.push_back(t.c_str());
      ConstraintHandle h;
      check(bridge_constraints_learn(paths.data(), paths.size(), learn_no_epsilon ? 0 : 1, &h.ptr),
            "learn-constraints");
      check(bridge_constraints_save(h.ptr, learn_out.c_str()), "save");
      std::cout << "wrote " << learn_out << "\n";
    } else if (mon->parsed()) {
      ConstraintHandle model;
      check(bridge_constraints_load(mon_constraints.c_str(), &model.ptr), "load constraints");
      const auto mode = mon_reference == "model" ? BRIDGE_REFERENCE_MODEL : BRIDGE_REFERENCE_STREAM;
      std::string alerts;
      if (mon_batch) {
        Text out;
        check(bridge_monitor_file(model.ptr, mon_trace.c_str(), mon_tol, mode, out.out()), "monitor");
        alerts = out.str();
      } else {
        MonitorHandle m;
        check(bridge_monitor_new(model.ptr, mon_tol, mode, &m.ptr), "monitor");
        std::ifstream in(mon_trace);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          Text out;
          const auto status = bridge_monitor_push(m.ptr, line.c_str(), out.out());
          if (status == BRIDGE_E_ORDERING) {
            std::cerr << "warning: line " << lineno << ": " << bridge_last_error() << "\n";
            continue;
          }
          check(status, ("line " + std::to_string(lineno)).c_str());
          alerts += out.str();
        }
        Text out;
        check(bridge_monitor_finish(m.ptr, out.out()), "monitor");
        alerts += out.str();
      }
      emit(mon_out, alerts);
      std::size_t n = 0;
      for (char c : alerts) n += c == '\n';
      std::cout << n << " alerts written to " << mon_out << "\n";
    } else if (trn->parsed()) {
      if (!trn_profile.empty()) {
        try {
          const auto j = nlohmann::json::parse(read_file(trn_profile));
          cfg.seq_len = j.at("itb").get<int>();
          cfg.omega = j.at("inertia_seconds").get<double>();
        } catch (const nlohmann::json::exception& e) {
          std::cerr << "error: profile: " << e.what() << "\n";
          return kExitData;
        }
      }
      if (trn_seq) cfg.seq_len = *trn_seq;
      if (trn_omega) cfg.omega = *trn_omega;
      cfg.seed = *trn_seed;
      PinnHandle h;
      check(bridge_pinn_train(trn_series.c_str(), &cfg, &h.ptr), "train-pinn");
      check(bridge_pinn_save(h.ptr, trn_out.c_str()), "save");
      if (!trn_history.empty()) {
        Text hist;
        check(bridge_pinn_history(h.ptr, hist.out()), "history");
        emit(trn_history, hist.str());
      }
      double theta = 0.0;
      check(bridge_pinn_theta(h.ptr, &theta), "theta");
      std::cout << "wrote " << trn_out << " (theta " << theta << ")\n";
    } else if (scr->parsed()) {
      PinnHandle h;
      check(bridge_pinn_load(scr_model.c_str(), &h.ptr), "load model");
      Text windows, warnings;
      check(bridge_pinn_score(h.ptr, scr_series.c_str(), windows.out(), warnings.out()), "score");
      if (!warnings.str().empty()) std::cerr << "warning: " << warnings.str();
      emit(scr_out, windows.str());
    } else if (itb->parsed()) {
      Text profile;
      check(bridge_derive_itb(itb_trace.c_str(), itb_series.c_str(), itb_delta, profile.out()),
            "derive-itb");
      emit(itb_out, profile.str());
      std::cout << profile.str() << "\n";
    } else if (cor->parsed()) {
      Text verdicts;
      check(bridge_correlate(cor_alerts.c_str(), cor_windows.c_str(), cor_profile.c_str(),
                             cor_series.c_str(), cor_cap, cor_delta_ss, cor_rate, verdicts.out()),
            "correlate");
      emit(cor_out, verdicts.str());
    } else if (rep->parsed()) {
      Text md;
      check(bridge_report(rep_verdicts.c_str(), md.out()), "report");
      emit(rep_out, md.str());
    }
  } catch (const DataError& e) {
    return e.code;
  }
  return 0;
}
