#include "bridge/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

const char* to_string(InertiaMethod method) {
  return method == InertiaMethod::stop_decay ? "STOP_DECAY" : "START_SETTLE";
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::confirmed: return "CONFIRMED";
    case Verdict::discarded_no_effect: return "DISCARDED_NO_EFFECT";
    case Verdict::discarded_preceding_effect: return "DISCARDED_PRECEDING_EFFECT";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view text) {
  if (text == "CONFIRMED") return Verdict::confirmed;
  if (text == "DISCARDED_NO_EFFECT") return Verdict::discarded_no_effect;
  if (text == "DISCARDED_PRECEDING_EFFECT") return Verdict::discarded_preceding_effect;
  throw Error(ErrorCode::parse, "unknown verdict '" + std::string(text) + "'");
}

int itb_from_inertia(double inertia_seconds) {
  return std::max(1, static_cast<int>(std::ceil(inertia_seconds - 1e-9)));
}

namespace {

// Delay until the rate of change after a command at t_s falls to δ of the
// rate at t_s. Rates are forward differences; log|rate| is fitted linearly
// in time, which is exact for a first-order lag.
std::optional<double> measure_delay(const Series& series, std::size_t col, double t_s,
                                    double t_next, double target, const InertiaOptions& opt) {
  const auto& fr = series.frames;
  std::size_t first = 0;
  while (first < fr.size() && fr[first].ts < t_s) ++first;
  if (first == fr.size()) return std::nullopt;

  const double x_pre = first > 0 ? fr[first - 1].values[col] : fr[first].values[col];
  const double dist_pre = std::abs(x_pre - target);
  if (dist_pre < opt.min_magnitude) return std::nullopt;

  std::vector<double> t_mid;
  std::vector<double> log_rate;
  double sign = 0.0;
  for (std::size_t k = first; k + 1 < fr.size() && static_cast<int>(k - first) < opt.max_frames;
       ++k) {
    if (fr[k + 1].ts >= t_next) break;
    const double dt = fr[k + 1].ts - fr[k].ts;
    const double rate = (fr[k + 1].values[col] - fr[k].values[col]) / dt;
    if (std::abs(rate) < 1e-12 * std::max(1.0, dist_pre)) break;
    const double s = rate > 0 ? 1.0 : -1.0;
    if (sign != 0.0 && s != sign) break;
    sign = s;
    t_mid.push_back(0.5 * (fr[k].ts + fr[k + 1].ts));
    log_rate.push_back(std::log(std::abs(rate)));
  }

  if (t_mid.size() < 2) {
    // Settled within one frame: the delay is bounded by the frame spacing.
    std::size_t after = first;
    while (after < fr.size() && fr[after].ts <= t_s) ++after;
    if (after < fr.size() && fr[after].ts < t_next &&
        std::abs(fr[after].values[col] - target) <= opt.delta * dist_pre) {
      return fr[after].ts - t_s;
    }
    return std::nullopt;
  }

  const double n = static_cast<double>(t_mid.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k < t_mid.size(); ++k) {
    st += t_mid[k];
    sy += log_rate[k];
    stt += t_mid[k] * t_mid[k];
    sty += t_mid[k] * log_rate[k];
  }
  const double denom = n * stt - st * st;
  if (denom == 0.0) return std::nullopt;
  const double slope = (n * sty - st * sy) / denom;
  if (!(slope < 0.0)) return std::nullopt;
  // log|rate(t)| = a + slope·t, so rate(t_s + d) = δ·rate(t_s) at d = ln δ / slope.
  return std::log(opt.delta) / slope;
}

}  // namespace

InertiaProfile derive_inertia(const Series& series, const std::vector<Command>& commands,
                              const InertiaOptions& options) {
  std::vector<double> stops;
  std::vector<double> starts;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const auto& c = commands[i];
    if (c.op != Op::write) continue;
    const auto col = series.index_of(c.tag);
    if (!col) continue;
    const double t_s = static_cast<double>(c.ts) / options.scan_cycles_per_second;
    double t_next = std::numeric_limits<double>::infinity();
    for (std::size_t k = i + 1; k < commands.size(); ++k) {
      if (commands[k].op == Op::write && commands[k].tag == c.tag) {
        t_next = static_cast<double>(commands[k].ts) / options.scan_cycles_per_second;
        break;
      }
    }
    const auto delay = measure_delay(series, *col, t_s, t_next, c.value, options);
    if (!delay) continue;
    (c.value == 0.0 ? stops : starts).push_back(*delay);
  }

  InertiaProfile profile;
  const auto& used = stops.empty() ? starts : stops;
  if (used.empty()) throw Error(ErrorCode::insufficient_data, "cannot derive inertia");
  profile.method = stops.empty() ? InertiaMethod::start_settle : InertiaMethod::stop_decay;
  double sum = 0.0;
  for (double d : used) sum += d;
  profile.inertia_seconds = sum / static_cast<double>(used.size());
  profile.itb = itb_from_inertia(profile.inertia_seconds);
  profile.samples = used.size();
  return profile;
}

bool steady_state(const Series& series, double at, double window, double delta_ss) {
  const auto& fr = series.frames;
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < fr.size(); ++k) {
    if (fr[k].ts >= at - window - 1e-9 && fr[k].ts <= at + 1e-9) idx.push_back(k);
  }
  if (idx.size() < 3) return false;
  for (std::size_t col = 0; col < series.tags.size(); ++col) {
    double lo = fr.front().values[col];
    double hi = lo;
    for (const auto& f : fr) {
      lo = std::min(lo, f.values[col]);
      hi = std::max(hi, f.values[col]);
    }
    double acc = 0.0;
    for (std::size_t k = 2; k < idx.size(); ++k) {
      acc += std::abs(fr[idx[k]].values[col] - 2.0 * fr[idx[k - 1]].values[col] +
                      fr[idx[k - 2]].values[col]);
    }
    const double mean_abs = acc / static_cast<double>(idx.size() - 2);
    if (mean_abs == 0.0) continue;
    if (!(mean_abs < delta_ss * (hi - lo))) return false;
  }
  return true;
}

EvolutionWindow evolution_window(double t0, const InertiaProfile& profile, const Series& series,
                                 int cap, double delta_ss) {
  if (cap < 1) throw Error(ErrorCode::config, "window cap must be >= 1");
  EvolutionWindow w;
  w.t0 = t0;
  w.cap = cap;
  const double last = series.empty() ? t0 : series.frames.back().ts;
  for (w.blocks = 1;; ++w.blocks) {
    const double boundary = t0 + w.blocks * profile.itb;
    if (boundary > last + 1e-9) {
      w.truncated = true;
      break;
    }
    if (steady_state(series, boundary, profile.itb, delta_ss)) {
      w.steady_reached = true;
      break;
    }
    if (w.blocks >= cap) break;
  }
  w.end = t0 + w.blocks * profile.itb;
  return w;
}

std::vector<AnomalyRun> anomaly_runs(const std::vector<ScoredWindow>& windows) {
  std::vector<AnomalyRun> runs;
  bool open = false;
  for (const auto& w : windows) {
    if (!w.anomalous) {
      open = false;
      continue;
    }
    if (!open) {
      runs.push_back({w.end, w.start, w.end, w.score});
      open = true;
    } else {
      runs.back().end = w.end;
      runs.back().peak = std::max(runs.back().peak, w.score);
    }
  }
  return runs;
}

std::vector<CorrelationVerdict> correlate(const std::vector<ScadaAlert>& alerts,
                                          const std::vector<ScoredWindow>& windows,
                                          const InertiaProfile& profile, const Series& series,
                                          const CorrelationOptions& options) {
  const auto runs = anomaly_runs(windows);
  std::vector<CorrelationVerdict> out;
  for (const auto& alert : alerts) {
    if (alert.provisional) continue;
    CorrelationVerdict v;
    v.alert = alert;
    v.devices = alert.devices;
    const double t0 = static_cast<double>(alert.ts) / options.scan_cycles_per_second;
    v.window = evolution_window(t0, profile, series, options.cap, options.delta_ss);

    bool confirmed = false;
    bool preceding = false;
    for (const auto& r : runs) {
      const bool overlaps = r.end >= t0 && r.onset <= v.window.end;
      if (!overlaps) continue;
      v.anomalies.push_back(r);
      if (r.onset >= t0) {
        confirmed = true;
      } else {
        preceding = true;
      }
    }
    v.verdict = confirmed    ? Verdict::confirmed
                : preceding  ? Verdict::discarded_preceding_effect
                             : Verdict::discarded_no_effect;
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

}  // namespace

std::string verdict_to_jsonl(const CorrelationVerdict& v) {
  ojson j;
  j["t0"] = v.window.t0;
  j["window"] = {{"start", v.window.t0},        {"end", v.window.end},
                 {"blocks", v.window.blocks},   {"steady_reached", v.window.steady_reached},
                 {"truncated", v.window.truncated}, {"cap", v.window.cap}};
  j["verdict"] = to_string(v.verdict);
  j["scada"] = ojson::parse(alert_to_jsonl(v.alert));
  ojson runs = ojson::array();
  for (const auto& r : v.anomalies) {
    runs.push_back({{"onset", r.onset}, {"start", r.start}, {"end", r.end}, {"peak", r.peak}});
  }
  j["process"] = {{"anomalies", runs}};
  j["devices"] = v.devices;
  return j.dump();
}

CorrelationVerdict verdict_from_json(const std::string& line) {
  try {
    const auto j = json::parse(line);
    CorrelationVerdict v;
    v.alert = alert_from_json(j.at("scada").dump());
    const auto& w = j.at("window");
    v.window.t0 = j.at("t0").get<double>();
    v.window.end = w.at("end").get<double>();
    v.window.blocks = w.at("blocks").get<int>();
    v.window.steady_reached = w.at("steady_reached").get<bool>();
    v.window.truncated = w.value("truncated", false);
    v.window.cap = w.at("cap").get<int>();
    v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    for (const auto& r : j.at("process").at("anomalies")) {
      v.anomalies.push_back({r.at("onset").get<double>(), r.at("start").get<double>(),
                             r.at("end").get<double>(), r.at("peak").get<double>()});
    }
    v.devices = j.at("devices").get<std::vector<std::string>>();
    return v;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("verdict: ") + e.what());
  }
}

void write_verdicts(const std::string& path, const std::vector<CorrelationVerdict>& verdicts) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  for (const auto& v : verdicts) out << verdict_to_jsonl(v) << '\n';
}

std::vector<CorrelationVerdict> read_verdicts(const std::string& path) {
  std::vector<CorrelationVerdict> out;
  for (const auto& line : lines_of(path)) out.push_back(verdict_from_json(line));
  return out;
}

std::string windows_to_jsonl(const std::vector<ScoredWindow>& windows) {
  std::string out;
  for (const auto& w : windows) {
    ojson j;
    j["start"] = w.start;
    j["end"] = w.end;
    j["score"] = w.score;
    j["anomalous"] = w.anomalous;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ScoredWindow> read_windows(const std::string& path) {
  std::vector<ScoredWindow> out;
  std::size_t n = 0;
  for (const auto& line : lines_of(path)) {
    ++n;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("start").get<double>(), j.at("end").get<double>(),
                     j.at("score").get<double>(), j.at("anomalous").get<bool>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, "window " + std::to_string(n) + ": " + e.what());
    }
    if (out.size() > 1 && out.back().end < out[out.size() - 2].end) {
      throw Error(ErrorCode::ordering, "window " + std::to_string(n) + " is out of order");
    }
  }
  return out;
}

std::string profile_to_json(const InertiaProfile& p) {
  ojson j;
  j["inertia_seconds"] = p.inertia_seconds;
  j["itb"] = p.itb;
  j["method"] = to_string(p.method);
  j["samples"] = p.samples;
  return j.dump(2);
}

InertiaProfile profile_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    InertiaProfile p;
    p.inertia_seconds = j.at("inertia_seconds").get<double>();
    p.itb = j.at("itb").get<int>();
    p.method = j.value("method", std::string("STOP_DECAY")) == "START_SETTLE"
                   ? InertiaMethod::start_settle
                   : InertiaMethod::stop_decay;
    p.samples = j.value("samples", std::size_t{0});
    if (p.itb < 1) throw Error(ErrorCode::config, "itb must be >= 1");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("inertia profile: ") + e.what());
  }
}

std::string render_report(const std::vector<CorrelationVerdict>& verdicts) {
  std::ostringstream out;
  std::size_t confirmed = 0;
  for (const auto& v : verdicts) confirmed += v.verdict == Verdict::confirmed;
  out << "# Correlation report\n\n";
  out << "SCADA alerts examined: " << verdicts.size() << "  \n";
  out << "Confirmed attacks: " << confirmed << "\n\n";
  if (verdicts.empty()) return out.str();
  out << "| t0 (s) | alert | devices | window (s) | blocks | verdict |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& v : verdicts) {
    std::string devices;
    for (const auto& d : v.devices) devices += (devices.empty() ? "" : ", ") + d;
    out << "| " << format_number(v.window.t0) << " | " << to_string(v.alert.kind) << " | "
        << devices << " | [" << format_number(v.window.t0) << ", "
        << format_number(v.window.end) << "] | " << v.window.blocks << " | "
        << to_string(v.verdict) << " |\n";
  }
  if (confirmed > 0) {
    out << "\n## Operator alerts\n\n";
    for (const auto& v : verdicts) {
      if (v.verdict != Verdict::confirmed) continue;
      out << "- " << to_string(v.alert.kind) << " at " << format_number(v.window.t0)
          << " s affecting";
      for (const auto& d : v.devices) out << ' ' << d;
      for (const auto& r : v.anomalies) {
        if (r.onset < v.window.t0) continue;
        out << "; process anomaly onset at " << format_number(r.onset) << " s";
        break;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace bridge
