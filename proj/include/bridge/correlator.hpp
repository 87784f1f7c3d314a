#pragma once

// Inertia time blocks, process evolution windows and the cause-before-effect
// join of SCADA alerts with process anomalies.

#include <optional>
#include <string>
#include <vector>

#include "bridge/monitor.hpp"
#include "bridge/trace.hpp"

namespace bridge {

enum class InertiaMethod { stop_decay, start_settle };
const char* to_string(InertiaMethod method);

struct InertiaProfile {
  double inertia_seconds = 0.0;
  int itb = 1;
  InertiaMethod method = InertiaMethod::stop_decay;
  std::size_t samples = 0;
};

struct InertiaOptions {
  double delta = 0.05;           // rate decay threshold
  double min_magnitude = 1e-3;   // smallest state change worth measuring
  int max_frames = 60;           // frames examined after each command
  double scan_cycles_per_second = 1000.0;
};

// Measures, for each qualifying WRITE on a tag present in the series, the
// time until the tag's rate of change falls to δ of its rate at the command.
// Stop commands (value 0) are preferred; start commands are used otherwise.
InertiaProfile derive_inertia(const Series& series, const std::vector<Command>& commands,
                              const InertiaOptions& options = {});

// Itb from a measured delay: ceil, floored at 1.
int itb_from_inertia(double inertia_seconds);

// True when the mean |second difference| over frames in [at − window, at] is
// below delta_ss · range(tag) for every tag. Fewer than 3 frames: false.
bool steady_state(const Series& series, double at, double window, double delta_ss = 0.01);

struct EvolutionWindow {
  double t0 = 0.0;
  int blocks = 1;
  double end = 0.0;
  bool steady_reached = false;
  bool truncated = false;
  int cap = 6;
};

EvolutionWindow evolution_window(double t0, const InertiaProfile& profile, const Series& series,
                                 int cap = 6, double delta_ss = 0.01);

struct ScoredWindow {
  double start = 0.0;  // ts of the first frame
  double end = 0.0;    // ts of the last frame
  double score = 0.0;
  bool anomalous = false;
};

struct AnomalyRun {
  double onset = 0.0;  // end time of the first anomalous window of the run
  double start = 0.0;  // start time of the first anomalous window
  double end = 0.0;    // end time of the last anomalous window
  double peak = 0.0;
};

// Maximal runs of consecutive anomalous windows.
std::vector<AnomalyRun> anomaly_runs(const std::vector<ScoredWindow>& windows);

enum class Verdict { confirmed, discarded_no_effect, discarded_preceding_effect };
const char* to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view text);

struct CorrelationVerdict {
  ScadaAlert alert;
  EvolutionWindow window;
  Verdict verdict = Verdict::discarded_no_effect;
  std::vector<AnomalyRun> anomalies;  // runs overlapping the window
  std::vector<std::string> devices;
};

struct CorrelationOptions {
  int cap = 6;
  double delta_ss = 0.01;
  double scan_cycles_per_second = 1000.0;
};

std::vector<CorrelationVerdict> correlate(const std::vector<ScadaAlert>& alerts,
                                          const std::vector<ScoredWindow>& windows,
                                          const InertiaProfile& profile, const Series& series,
                                          const CorrelationOptions& options = {});

std::string verdict_to_jsonl(const CorrelationVerdict& verdict);
CorrelationVerdict verdict_from_json(const std::string& line);
void write_verdicts(const std::string& path, const std::vector<CorrelationVerdict>& verdicts);
std::vector<CorrelationVerdict> read_verdicts(const std::string& path);

std::string windows_to_jsonl(const std::vector<ScoredWindow>& windows);
std::vector<ScoredWindow> read_windows(const std::string& path);

std::string profile_to_json(const InertiaProfile& profile);
InertiaProfile profile_from_json(const std::string& text);

// Markdown summary of verdicts with the affected device tags.
std::string render_report(const std::vector<CorrelationVerdict>& verdicts);

}  // namespace bridge
