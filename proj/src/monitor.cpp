#include "bridge/monitor.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

const char* to_string(AlertKind kind) {
  switch (kind) {
    case AlertKind::control_time: return "CONTROL_TIME";
    case AlertKind::control_burst: return "CONTROL_BURST";
    case AlertKind::control_freq: return "CONTROL_FREQ";
  }
  return "?";
}

AlertKind alert_kind_from_string(std::string_view text) {
  if (text == "CONTROL_TIME") return AlertKind::control_time;
  if (text == "CONTROL_BURST") return AlertKind::control_burst;
  if (text == "CONTROL_FREQ") return AlertKind::control_freq;
  throw Error(ErrorCode::parse, "unknown alert kind '" + std::string(text) + "'");
}

bool alert_less(const ScadaAlert& a, const ScadaAlert& b) {
  return std::tie(a.ts, a.kind, a.event, a.devices, a.observed, a.provisional) <
         std::tie(b.ts, b.kind, b.event, b.devices, b.observed, b.provisional);
}

double observed_delta(std::int64_t ts_prev, std::int64_t ts_cur, double mean_interval) {
  if (!(mean_interval > 0.0)) {
    throw Error(ErrorCode::degenerate_data, "reference interval must be positive");
  }
  const auto diff = ts_prev > ts_cur ? ts_prev - ts_cur : ts_cur - ts_prev;
  return static_cast<double>(diff) / mean_interval;
}

double observed_mu(int cur_burst, int prev_burst) {
  const double m = 0.5 * (cur_burst + prev_burst);
  if (m == 0.0) return 0.0;
  return (cur_burst - prev_burst) / m;
}

double observed_freq(long count, long total) {
  if (total <= 0) throw Error(ErrorCode::insufficient_data, "operation has no commands");
  return static_cast<double>(count) / static_cast<double>(total);
}

bool violates(double deviation, double constraint, double tol) {
  const double bound = constraint * tol;
  return deviation > bound + 1e-12 * std::max(1.0, bound);
}

bool ReferenceState::reference(const std::string& event, const DevicePair& pair,
                               double* mean) const {
  auto it = sums_.find({event, pair.first, pair.second});
  if (it == sums_.end() || it->second.second == 0) return false;
  *mean = it->second.first / static_cast<double>(it->second.second);
  return true;
}

void ReferenceState::record(const std::string& event, const DevicePair& pair, double interval) {
  auto& s = sums_[{event, pair.first, pair.second}];
  s.first += interval;
  s.second += 1;
}

namespace {

// Shared by batch and stream: decide one control-time sample.
void decide_time(const std::string& event, const DevicePair& pair, double interval,
                 std::int64_t ts, const EventConstraints& ec, const MonitorOptions& options,
                 ReferenceState& state, std::vector<ScadaAlert>& out) {
  const auto it = ec.control_time.find(pair);
  if (it == ec.control_time.end()) return;
  double reference = it->second.mean_interval;
  if (options.reference == ReferenceMode::stream && !state.reference(event, pair, &reference)) {
    state.record(event, pair, interval);
    return;
  }
  const double observed = interval / reference;
  const double deviation = delta_deviation(observed);
  if (violates(deviation, it->second.rd, options.tol)) {
    out.push_back({AlertKind::control_time, event, {pair.first, pair.second}, observed,
                   deviation, it->second.rd, ts, false});
  } else if (options.reference == ReferenceMode::stream) {
    state.record(event, pair, interval);
  }
}

void decide_burst(const std::string& event, const std::string& device, int cur, int prev,
                  std::int64_t ts, const EventConstraints& ec, const MonitorOptions& options,
                  std::vector<ScadaAlert>& out) {
  const auto it = ec.control_burst.find(device);
  if (it == ec.control_burst.end()) return;
  const double observed = observed_mu(cur, prev);
  const double deviation = mu_deviation(observed);
  if (violates(deviation, it->second.rd, options.tol)) {
    out.push_back({AlertKind::control_burst, event, {device}, observed, deviation,
                   it->second.rd, ts, false});
  }
}

bool decide_freq(const std::string& event, const std::string& device, long count, long total,
                 std::int64_t ts, bool provisional, const EventConstraints& ec,
                 const MonitorOptions& options, std::vector<ScadaAlert>& out) {
  const auto it = ec.control_freq.find(device);
  if (it == ec.control_freq.end()) return false;
  const double observed = observed_freq(count, total);
  if (!violates(observed, it->second, options.tol)) return false;
  out.push_back({AlertKind::control_freq, event, {device}, observed, observed, it->second, ts,
                 provisional});
  return true;
}

struct TimedBurst {
  int size;
  std::int64_t end_ts;
};

std::map<std::string, std::vector<TimedBurst>> timed_bursts(const ProcessControlOperation& op) {
  std::map<std::string, std::vector<TimedBurst>> out;
  for (std::size_t k = 0; k < op.commands.size();) {
    const auto& c = op.commands[k];
    if (c.op != Op::write) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < op.commands.size() && op.commands[end + 1].op == Op::write &&
           op.commands[end + 1].tag == c.tag) {
      ++end;
    }
    out[c.tag].push_back({static_cast<int>(end - k + 1), op.commands[end].ts});
    k = end + 1;
  }
  return out;
}

}  // namespace

std::vector<ScadaAlert> check_operation(const ProcessControlOperation& op,
                                        const ConstraintModel& model,
                                        const MonitorOptions& options, ReferenceState* state) {
  std::vector<ScadaAlert> out;
  const EventConstraints* ec = model.find(op.event);
  if (ec == nullptr) return out;
  ReferenceState local;
  ReferenceState& ref = state ? *state : local;

  // Δ samples are visited in write order so the running reference evolves
  // exactly as it would online.
  const auto deps = extract_rbw(op);
  const auto samples = control_time_samples(deps, op);
  struct Pending {
    std::int64_t ts;
    std::size_t order;
    DevicePair pair;
    double interval;
  };
  std::vector<Pending> pending;
  for (const auto& dep : deps) {
    DevicePair key{dep.src, dep.dst};
    const auto& s = samples.at(key);
    for (std::size_t k = 0; k < dep.occurrences.size(); ++k) {
      pending.push_back({dep.occurrences[k].second, pending.size(), key, s[k]});
    }
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.ts < b.ts; });
  for (const auto& p : pending) decide_time(op.event, p.pair, p.interval, p.ts, *ec, options, ref, out);

  for (const auto& [device, bursts] : timed_bursts(op)) {
    for (std::size_t k = 1; k < bursts.size(); ++k) {
      decide_burst(op.event, device, bursts[k].size, bursts[k - 1].size, bursts[k].end_ts, *ec,
                   options, out);
    }
  }

  std::map<std::string, std::int64_t> last_write;
  for (const auto& c : op.commands) {
    if (c.op == Op::write) last_write[c.tag] = c.ts;
  }
  for (const auto& [device, f] : control_frequency(op)) {
    decide_freq(op.event, device, f.count, f.total, last_write[device], false, *ec, options, out);
  }
  return out;
}

std::vector<ScadaAlert> check_trace(const std::vector<Command>& commands, const EventSet& events,
                                    const ConstraintModel& model, const MonitorOptions& options) {
  ReferenceState state;
  std::vector<ScadaAlert> out;
  for (const auto& op : segment_operations(commands, events)) {
    auto alerts = check_operation(op, model, options, &state);
    out.insert(out.end(), alerts.begin(), alerts.end());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScadaAlert& a, const ScadaAlert& b) { return a.ts < b.ts; });
  return out;
}

StreamMonitor::StreamMonitor(const ConstraintModel& model, EventSet events, MonitorOptions options)
    : model_(model), events_(std::move(events)), options_(options) {}

void StreamMonitor::open(const std::string& event, std::vector<ScadaAlert>& out) {
  close(out);
  open_ = true;
  event_ = event;
  constraints_ = model_.find(event);
  total_ = 0;
  writes_.clear();
  write_times_.clear();
  prev_burst_.clear();
  provisional_sent_.clear();
  burst_ = {};
  has_governing_ = false;
  has_pending_ = false;
}

void StreamMonitor::close_burst(std::vector<ScadaAlert>& out) {
  if (burst_.size == 0) return;
  auto prev = prev_burst_.find(burst_.device);
  if (prev != prev_burst_.end() && constraints_ != nullptr) {
    decide_burst(event_, burst_.device, burst_.size, prev->second, burst_.last_ts, *constraints_,
                 options_, out);
  }
  prev_burst_[burst_.device] = burst_.size;
  burst_ = {};
}

void StreamMonitor::close(std::vector<ScadaAlert>& out) {
  if (!open_) return;
  close_burst(out);
  if (constraints_ != nullptr) {
    for (const auto& [device, count] : writes_) {
      decide_freq(event_, device, count, total_, write_times_[device].back(), false,
                  *constraints_, options_, out);
    }
  }
  open_ = false;
}

void StreamMonitor::on_write(const Command& c, std::vector<ScadaAlert>& out) {
  if (burst_.size > 0 && burst_.device == c.tag) {
    ++burst_.size;
    burst_.last_ts = c.ts;
  } else {
    close_burst(out);
    burst_ = {c.tag, 1, c.ts};
  }

  if (has_governing_ && constraints_ != nullptr) {
    std::int64_t anchor = governing_.ts;
    const auto& times = write_times_[governing_.tag];
    for (auto it = times.rbegin(); it != times.rend(); ++it) {
      if (*it < c.ts) {
        anchor = *it;
        break;
      }
    }
    const double interval = static_cast<double>(c.ts > anchor ? c.ts - anchor : anchor - c.ts);
    decide_time(event_, {governing_.tag, c.tag}, interval, c.ts, *constraints_, options_,
                reference_, out);
  }

  write_times_[c.tag].push_back(c.ts);
  const long count = ++writes_[c.tag];
  if (constraints_ != nullptr && !provisional_sent_[c.tag]) {
    provisional_sent_[c.tag] =
        decide_freq(event_, c.tag, count, total_, c.ts, true, *constraints_, options_, out);
  }
}

std::vector<ScadaAlert> StreamMonitor::push(const Command& c) {
  std::vector<ScadaAlert> out;
  if (have_last_ts_ && c.ts < last_ts_) {
    errors_.push_back("command at ts " + std::to_string(c.ts) + " arrived after ts " +
                      std::to_string(last_ts_) + "; skipped");
    return out;
  }
  have_last_ts_ = true;
  last_ts_ = c.ts;

  if (c.is_marker()) {
    open(*c.event, out);
    return out;
  }
  if (c.event && (!open_ || event_ != *c.event)) {
    open(*c.event, out);
  } else if (!open_) {
    open(std::string(kPreambleEvent), out);
  }

  if (has_pending_ && pending_.ts < c.ts) {
    governing_ = pending_;
    has_governing_ = true;
    has_pending_ = false;
  }
  ++total_;
  if (c.op == Op::read) {
    close_burst(out);
    pending_ = c;
    has_pending_ = true;
  } else {
    on_write(c, out);
  }
  return out;
}

std::vector<ScadaAlert> StreamMonitor::finish() {
  std::vector<ScadaAlert> out;
  close(out);
  return out;
}

std::vector<ScadaAlert> stream_monitor(const std::vector<Command>& commands,
                                       const EventSet& events, const ConstraintModel& model,
                                       const MonitorOptions& options,
                                       std::vector<std::string>* errors) {
  StreamMonitor monitor(model, events, options);
  std::vector<ScadaAlert> out;
  for (const auto& c : commands) {
    auto a = monitor.push(c);
    out.insert(out.end(), a.begin(), a.end());
  }
  auto a = monitor.finish();
  out.insert(out.end(), a.begin(), a.end());
  if (errors) *errors = monitor.errors();
  return out;
}

std::string alert_to_jsonl(const ScadaAlert& a) {
  nlohmann::ordered_json j;
  j["ts"] = a.ts;
  j["kind"] = to_string(a.kind);
  j["event"] = a.event;
  j["devices"] = a.devices;
  j["observed"] = a.observed;
  j["constraint"] = a.constraint;
  j["deviation"] = a.deviation;
  j["provisional"] = a.provisional;
  return j.dump();
}

ScadaAlert alert_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ScadaAlert a;
    a.ts = j.at("ts").get<std::int64_t>();
    a.kind = alert_kind_from_string(j.at("kind").get<std::string>());
    a.event = j.at("event").get<std::string>();
    a.devices = j.at("devices").get<std::vector<std::string>>();
    a.observed = j.at("observed").get<double>();
    a.constraint = j.at("constraint").get<double>();
    a.deviation = j.value("deviation", a.observed);
    a.provisional = j.value("provisional", false);
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("alert: ") + e.what());
  }
}

void write_alerts(const std::string& path, const std::vector<ScadaAlert>& alerts) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  for (const auto& a : alerts) out << alert_to_jsonl(a) << '\n';
}

std::vector<ScadaAlert> read_alerts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::vector<ScadaAlert> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(alert_from_json(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace bridge
