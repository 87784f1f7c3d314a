#pragma once

// Observed control metrics checked against a ConstraintModel, as a batch pass
// over segmented operations or as an online state machine.

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "bridge/constraints.hpp"
#include "bridge/trace.hpp"

namespace bridge {

enum class AlertKind { control_time, control_burst, control_freq };

const char* to_string(AlertKind kind);
AlertKind alert_kind_from_string(std::string_view text);

struct ScadaAlert {
  AlertKind kind = AlertKind::control_time;
  std::string event;
  std::vector<std::string> devices;  // (i, j) for time, (i) otherwise
  double observed = 0.0;             // Δ_obs, μ_obs or Ϝ_obs
  double deviation = 0.0;            // distance of `observed` from benign
  double constraint = 0.0;           // the R_D value compared against
  std::int64_t ts = 0;               // scan cycle of the triggering WRITE
  bool provisional = false;

  bool operator==(const ScadaAlert&) const = default;
};

bool alert_less(const ScadaAlert& a, const ScadaAlert& b);

// Where the reference interval for Δ_obs comes from.
//  stream: running mean of earlier non-violating intervals of the same
//          (event, i, j) seen by this monitor; the first one only calibrates.
//  model:  mean_interval stored in the ConstraintModel.
enum class ReferenceMode { stream, model };

struct MonitorOptions {
  double tol = 1.0;
  ReferenceMode reference = ReferenceMode::stream;
};

double observed_delta(std::int64_t ts_prev, std::int64_t ts_cur, double mean_interval);
double observed_mu(int cur_burst, int prev_burst);
double observed_freq(long count, long total);

// Deviations of the observed metrics from their benign values.
inline double delta_deviation(double observed) { return observed > 1.0 ? observed - 1.0 : 1.0 - observed; }
inline double mu_deviation(double observed) { return observed < 0 ? -observed : observed; }

// deviation > constraint · tol, with a relative slack of a few ULPs so that
// a value equal to its own training mean never fires.
bool violates(double deviation, double constraint, double tol);

class ReferenceState {
 public:
  // Returns false when the pair has no reference yet.
  bool reference(const std::string& event, const DevicePair& pair, double* mean) const;
  void record(const std::string& event, const DevicePair& pair, double interval);

 private:
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, long>> sums_;
};

std::vector<ScadaAlert> check_operation(const ProcessControlOperation& op,
                                        const ConstraintModel& model,
                                        const MonitorOptions& options = {},
                                        ReferenceState* state = nullptr);

std::vector<ScadaAlert> check_trace(const std::vector<Command>& commands, const EventSet& events,
                                    const ConstraintModel& model,
                                    const MonitorOptions& options = {});

class StreamMonitor {
 public:
  StreamMonitor(const ConstraintModel& model, EventSet events, MonitorOptions options = {});

  // Consumes one command or marker and returns the alerts decided by it.
  std::vector<ScadaAlert> push(const Command& command);
  // Closes the open operation.
  std::vector<ScadaAlert> finish();

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  struct Burst {
    std::string device;
    int size = 0;
    std::int64_t last_ts = 0;
  };

  void open(const std::string& event, std::vector<ScadaAlert>& out);
  void close(std::vector<ScadaAlert>& out);
  void close_burst(std::vector<ScadaAlert>& out);
  void on_write(const Command& c, std::vector<ScadaAlert>& out);

  const ConstraintModel& model_;
  EventSet events_;
  MonitorOptions options_;
  ReferenceState reference_;
  std::vector<std::string> errors_;

  bool have_last_ts_ = false;
  std::int64_t last_ts_ = 0;

  bool open_ = false;
  std::string event_;
  const EventConstraints* constraints_ = nullptr;
  long total_ = 0;
  std::map<std::string, long> writes_;
  std::map<std::string, std::vector<std::int64_t>> write_times_;
  std::map<std::string, int> prev_burst_;
  std::map<std::string, bool> provisional_sent_;
  Burst burst_;
  Command governing_;  // last READ in an earlier scan cycle
  Command pending_;    // last READ in the current scan cycle
  bool has_governing_ = false;
  bool has_pending_ = false;
};

std::vector<ScadaAlert> stream_monitor(const std::vector<Command>& commands,
                                       const EventSet& events, const ConstraintModel& model,
                                       const MonitorOptions& options = {},
                                       std::vector<std::string>* errors = nullptr);

std::string alert_to_jsonl(const ScadaAlert& alert);
ScadaAlert alert_from_json(const std::string& line);
void write_alerts(const std::string& path, const std::vector<ScadaAlert>& alerts);
std::vector<ScadaAlert> read_alerts(const std::string& path);

}  // namespace bridge
