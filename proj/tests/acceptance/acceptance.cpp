// Acceptance harness: one PASS or FAIL line per criterion, with the measured
// values that decided it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "bridge/constraints.hpp"
#include "bridge/correlator.hpp"
#include "bridge/monitor.hpp"
#include "bridge/pinn.hpp"
#include "bridge/plant.hpp"
#include "oracles.hpp"

using namespace bridge;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::vector<ScadaAlert> finals(const std::vector<ScadaAlert>& alerts) {
  std::vector<ScadaAlert> out;
  for (const auto& a : alerts) {
    if (!a.provisional) out.push_back(a);
  }
  return out;
}

ConstraintModel learn(const std::vector<SimOutput>& runs, const ConstraintOptions& opt = {}) {
  std::vector<ProcessControlOperation> ops;
  for (const auto& o : runs) {
    auto seg = segment_operations(o.trace.commands, o.events);
    ops.insert(ops.end(), seg.begin(), seg.end());
  }
  return build_constraint_model(ops, opt);
}

SimOutput run(std::uint64_t seed, const AttackSpec* attack = nullptr) {
  auto cfg = dosing_scenario();
  cfg.seed = seed;
  return attack != nullptr ? simulate(cfg, *attack) : simulate(cfg);
}

struct Detection {
  std::vector<ScadaAlert> alerts;
  std::vector<ScoredWindow> windows;
  InertiaProfile profile;
  std::vector<CorrelationVerdict> verdicts;
  int confirmed = 0;
};

Detection detect(const SimOutput& o, const ConstraintModel& model, const PinnModel& pinn) {
  Detection d;
  d.alerts = finals(check_trace(o.trace.commands, o.events, model));
  d.windows = score(pinn, o.series);
  d.profile = derive_inertia(o.series, o.trace.commands);
  d.verdicts = correlate(d.alerts, d.windows, d.profile, o.series);
  for (const auto& v : d.verdicts) d.confirmed += v.verdict == Verdict::confirmed ? 1 : 0;
  return d;
}

// Shared benign training artifacts.
struct Trained {
  ConstraintModel model;
  PinnModel pinn;
  double seconds = 0.0;
};

Trained train_all() {
  const auto t0 = Clock::now();
  Trained t;
  t.model = learn({run(101), run(102), run(103)});
  t.pinn = train(make_sequences(run(201).series, 5), PinnHyper{});
  t.seconds = seconds_since(t0);
  return t;
}

Outcome oldsmar_case(const Trained& t) {
  const auto t0 = Clock::now();
  AttackSpec atk;
  atk.category = AttackCategory::oldsmar;
  const auto d = detect(run(7, &atk), t.model, t.pinn);
  const double secs = t.seconds + seconds_since(t0);
  std::vector<const ScadaAlert*> time_alerts;
  for (const auto& a : d.alerts) {
    if (a.kind == AlertKind::control_time) time_alerts.push_back(&a);
  }
  if (time_alerts.size() != 1) {
    return {false, fmt("%zu CONTROL_TIME alerts, expected exactly one", time_alerts.size())};
  }
  const auto& a = *time_alerts.front();
  const bool pair = a.devices == std::vector<std::string>{"Valve.0", "Valve.2"};
  const double ratio = a.deviation / a.constraint;
  const CorrelationVerdict* v = nullptr;
  for (const auto& x : d.verdicts) {
    if (x.alert == a) v = &x;
  }
  bool inside = false;
  if (v != nullptr) {
    for (const auto& r : v->anomalies) inside |= r.onset >= v->window.t0 && r.onset <= v->window.end;
  }
  const bool confirmed = v != nullptr && v->verdict == Verdict::confirmed;
  return {pair && ratio >= 2.0 && inside && confirmed && secs < 120.0,
          fmt("pair %s->%s, observed %.4f, deviation %.4f vs R_D %.3g (ratio %.3g), window [%g, %g], "
              "anomaly inside %s, verdict %s, runtime %.1f s",
              a.devices.front().c_str(), a.devices.back().c_str(), a.observed, a.deviation,
              a.constraint, ratio, v ? v->window.t0 : 0.0, v ? v->window.end : 0.0,
              inside ? "yes" : "no", v ? to_string(v->verdict) : "none", secs)};
}

Outcome mimicry_case(const Trained& t) {
  AttackSpec atk;
  atk.category = AttackCategory::mimicry;
  const auto d = detect(run(7, &atk), t.model, t.pinn);
  int time = 0, burst = 0;
  bool freq_exact = false;
  double freq_obs = 0.0, freq_rd = 0.0;
  for (const auto& a : d.alerts) {
    time += a.kind == AlertKind::control_time ? 1 : 0;
    burst += a.kind == AlertKind::control_burst ? 1 : 0;
    if (a.kind == AlertKind::control_freq && a.devices == std::vector<std::string>{"P.0"}) {
      freq_obs = a.observed;
      freq_rd = a.constraint;
      freq_exact |= std::abs(a.observed - 0.75) < 1e-12 && std::abs(a.constraint - 0.25) < 1e-12;
    }
  }
  return {time == 0 && burst > 0 && freq_exact && d.confirmed > 0,
          fmt("CONTROL_TIME %d, CONTROL_BURST %d, CONTROL_FREQ observed %.6g vs %.6g, confirmed %d",
              time, burst, freq_obs, freq_rd, d.confirmed)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome preceding_case() {
  const std::string dir = std::string(BRIDGE_FIXTURES) + "/preceding/";
  const auto alerts = read_alerts(dir + "alerts.jsonl");
  const auto windows = read_windows(dir + "windows.jsonl");
  const auto v = correlate(alerts, windows, profile_from_json(slurp(dir + "profile.json")),
                           parse_series(dir + "series.csv"));
  const auto runs = anomaly_runs(windows);
  int confirmed = 0, preceding = 0;
  for (const auto& x : v) {
    confirmed += x.verdict == Verdict::confirmed ? 1 : 0;
    preceding += x.verdict == Verdict::discarded_preceding_effect ? 1 : 0;
  }
  const double lead = runs.empty() || alerts.empty()
                          ? 0.0
                          : static_cast<double>(alerts.front().ts) / 1000.0 - runs.front().onset;
  return {preceding == 1 && confirmed == 0 && std::abs(lead - 2.0) < 1e-9,
          fmt("onset %.3g s before the alert, %d preceding, %d confirmed", lead, preceding, confirmed)};
}

Outcome calibration_case() {
  ConstraintOptions no_eps;
  no_eps.use_epsilon = false;
  auto base = dosing_scenario();
  base.noise = 0.0;
  const auto model = learn({simulate(base)}, no_eps);
  std::vector<ConstraintModel> models;
  int time_alerts = 0;
  const int n = 20;
  for (int k = 0; k < n; ++k) {
    auto cfg = dosing_scenario();
    cfg.setpoint = 1.0 + 9.0 * k / (n - 1);
    cfg.seed = 500 + k;
    const auto noisy = simulate(cfg);
    MonitorOptions opt;
    opt.tol = 1.0;
    for (const auto& a : finals(check_trace(noisy.trace.commands, noisy.events, model, opt))) {
      time_alerts += a.kind == AlertKind::control_time ? 1 : 0;
    }
    cfg.noise = 0.0;
    models.push_back(learn({simulate(cfg)}, no_eps));
  }
  const auto rep = dispersion_across_calibrations(models);
  double worst = 0.0;
  std::string worst_key;
  for (const auto& e : rep.entries) {
    if (e.key.find("|time|") == std::string::npos) continue;
    if (e.sd >= worst) {
      worst = e.sd;
      worst_key = e.key;
    }
  }
  return {time_alerts == 0 && worst < 0.05 && rep.missing.empty(),
          fmt("%d runs over S_V [1, 10], %d CONTROL_TIME alerts, largest R_D time SD %.3g (%s), "
              "%zu keys missing",
              n, time_alerts, worst, worst_key.c_str(), rep.missing.size())};
}

Outcome itb_case() {
  Series s;
  s.tags = {"V"};
  for (int k = 0; k <= 40; ++k) {
    const double t = k;
    s.frames.push_back({t, {t < 10.0 ? 1.0 : std::exp(-(t - 10.0))}});
  }
  Command stop;
  stop.ts = 10000;
  stop.op = Op::write;
  stop.tag = "V";
  stop.value = 0.0;
  const auto lag = derive_inertia(s, {stop});
  const auto o = run(1);
  const auto dosing = derive_inertia(o.series, o.trace.commands);
  const double expected = std::log(20.0);
  return {std::abs(lag.inertia_seconds - expected) <= 0.1 && dosing.itb == 5,
          fmt("analytic %.4f s vs %.4f s, dosing inertia %.4f s gives itb %d", lag.inertia_seconds,
              expected, dosing.inertia_seconds, dosing.itb)};
}

Outcome gradient_case() {
  const auto t0 = Clock::now();
  PinnHyper h;
  h.seq_len = 4;
  h.seed = 3;
  h.weights.beta = 0.01;
  h.weights.gamma = 0.1;
  FeatureScaling scaling{{"a", "b", "c"}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  const auto m = init_model(h, 3, scaling, 1.0);
  Matrix x(8, 3);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 0.5 + 0.4 * std::sin(0.7 * i * i + 0.3);
  Matrix noise(2, static_cast<std::size_t>(m.hyper.latent));
  for (std::size_t i = 0; i < noise.size(); ++i) noise.data[i] = std::cos(1.3 * i);
  auto loss = [&] { return loss_graph(m, x, 2, &noise).total; };
  ad::zero_grad(m.params);
  ad::backward(loss());
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (std::size_t p = 0; p < m.params.size(); ++p) {
    double d2 = 0.0, f2 = 0.0, a2 = 0.0;
    for (std::size_t i = 0; i < m.params[p]->value.size(); ++i) {
      double& v = m.params[p]->value.data[i];
      const double orig = v;
      const double step = 1e-6;
      v = orig + step;
      const double up = loss()->value.data[0];
      v = orig - step;
      const double down = loss()->value.data[0];
      v = orig;
      const double fd = (up - down) / (2.0 * step);
      const double an = m.params[p]->grad.data[i];
      d2 += (fd - an) * (fd - an);
      f2 += fd * fd;
      a2 += an * an;
      ++checked;
    }
    const double rel = std::sqrt(d2) / std::max({1e-12, std::sqrt(f2), std::sqrt(a2)});
    if (rel >= worst) {
      worst = rel;
      worst_name = m.param_names[p];
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 30.0,
          fmt("%zu tensors, %zu entries, largest relative error %.3g (%s), runtime %.1f s",
              m.params.size(), checked, worst, worst_name.c_str(), secs)};
}

Outcome pde_ordering_case() {
  const auto t0 = Clock::now();
  const auto batch = make_sequences(run(1).series, 5);
  PinnHyper with;
  with.seed = 7;
  PinnHyper without = with;
  without.weights.gamma = 0.0;
  const auto m_with = train(batch, with);
  auto m_without = train(batch, without);
  m_without.hyper.weights.gamma = with.weights.gamma;
  const auto a = evaluate(m_with, batch);
  const auto b = evaluate(m_without, batch);
  const double secs = seconds_since(t0);
  return {a.total <= b.total && a.mse <= 1.2 * b.mse && secs < 600.0,
          fmt("gamma %.3g objective: %.6g (trained with) vs %.6g (trained without); reconstruction "
              "%.6g vs %.6g (ratio %.3f); runtime %.1f s",
              with.weights.gamma, a.total, b.total, a.mse, b.mse, a.mse / b.mse, secs)};
}

Outcome oracle_case() {
  std::mt19937_64 rng(8);
  int mismatches = 0, monitors = 0;
  const int n = 1000;
  std::vector<std::vector<Command>> corpus;
  for (int trial = 0; trial < n; ++trial) corpus.push_back(oracle::random_trace(rng));
  for (int trial = 0; trial < n; ++trial) {
    const auto& cmds = corpus[trial];
    std::vector<ProcessControlOperation> ops = segment_operations(cmds, {});
    for (const auto& op : ops) {
      std::map<oracle::Pair, std::vector<std::pair<std::int64_t, std::int64_t>>> got;
      for (const auto& d : extract_rbw(op)) got[{d.src, d.dst}] = d.occurrences;
      mismatches += got == oracle::rbw(op.commands) ? 0 : 1;
    }
    for (const bool literal : {false, true}) {
      ConstraintOptions opt;
      opt.lambda_complement = !literal;
      const auto m = build_constraint_model(ops, opt);
      for (const auto& [event, ec] : m.events) {
        std::map<oracle::Pair, std::vector<double>> samples;
        std::vector<oracle::Pair> occ;
        std::map<std::string, std::vector<int>> bursts;
        std::vector<const ProcessControlOperation*> mine;
        for (const auto& op : ops) {
          if (op.event != event) continue;
          mine.push_back(&op);
          for (const auto& [k, v] : oracle::intervals(op.commands)) {
            samples[k].insert(samples[k].end(), v.begin(), v.end());
            occ.insert(occ.end(), v.size(), k);
          }
          for (const auto& [k, v] : oracle::bursts(op.commands)) {
            bursts[k].insert(bursts[k].end(), v.begin(), v.end());
          }
        }
        for (const auto& [key, tc] : ec.control_time) {
          const double eps = oracle::epsilon(occ, key.first, key.second);
          mismatches += std::abs(tc.epsilon - eps) < 1e-12 ? 0 : 1;
          mismatches += oracle::relative_error(tc.rd, oracle::cv_plus(samples.at(key), eps)) < 1e-12 ? 0 : 1;
        }
        for (const auto& [tag, bc] : ec.control_burst) {
          const auto& b = bursts.at(tag);
          const double l = oracle::lambda(b, oracle::mode(b));
          mismatches += std::abs(bc.lambda - l) < 1e-12 ? 0 : 1;
          const double add = literal ? l : 1.0 - l;
          mismatches += oracle::relative_error(bc.rd, oracle::cv_plus(oracle::as_double(b), add)) < 1e-12 ? 0 : 1;
        }
        for (const auto& [tag, rd] : ec.control_freq) {
          double sum = 0.0;
          for (const auto* op : mine) {
            const auto w = std::count_if(op->commands.begin(), op->commands.end(), [&](const Command& x) {
              return x.op == Op::write && x.tag == tag;
            });
            sum += static_cast<double>(w) / static_cast<double>(op->commands.size());
          }
          mismatches += std::abs(rd - sum / static_cast<double>(mine.size())) < 1e-12 ? 0 : 1;
        }
      }
    }
    // Batch and stream monitoring of the next trace against this trace's model.
    const auto model = build_constraint_model(ops);
    const auto& live = corpus[(trial + 1) % n];
    for (auto mode : {ReferenceMode::stream, ReferenceMode::model}) {
      MonitorOptions opt;
      opt.reference = mode;
      auto s = finals(stream_monitor(live, {}, model, opt));
      auto b = finals(check_trace(live, {}, model, opt));
      std::sort(s.begin(), s.end(), alert_less);
      std::sort(b.begin(), b.end(), alert_less);
      monitors += s == b ? 0 : 1;
    }
  }
  return {mismatches == 0 && monitors == 0,
          fmt("%d traces: %d formula mismatches, %d batch/stream disagreements", n, mismatches, monitors)};
}

Outcome threshold_case(const Trained& t) {
  const auto batch = make_sequences(run(201).series, 5);
  const auto errors = reconstruction_errors(t.pinn, batch);
  const std::size_t hold = static_cast<std::size_t>(std::floor(t.pinn.hyper.holdout * batch.count));
  std::size_t flagged = 0;
  for (std::size_t i = batch.count - hold; i < batch.count; ++i) flagged += errors[i] > t.pinn.theta ? 1 : 0;
  const double frac = static_cast<double>(flagged) / static_cast<double>(hold);
  const double bound = 0.25 + 2.0 / static_cast<double>(hold);
  std::size_t fresh_flagged = 0;
  const auto fresh = score(t.pinn, run(202).series);
  for (const auto& w : fresh) fresh_flagged += w.anomalous ? 1 : 0;
  return {frac <= bound,
          fmt("%zu of %zu validation windows above theta (%.3f, bound %.3f); unseen benign run %zu of %zu",
              flagged, hold, frac, bound, fresh_flagged, fresh.size())};
}

Outcome detection_case(const Trained& t) {
  const auto t0 = Clock::now();
  int tp = 0, fp = 0;
  std::string per_category;
  for (auto cat : {AttackCategory::oldsmar, AttackCategory::stealth_increment, AttackCategory::toggle,
                   AttackCategory::mimicry}) {
    int hits = 0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      AttackSpec atk;
      atk.category = cat;
      hits += detect(run(s, &atk), t.model, t.pinn).confirmed > 0 ? 1 : 0;
    }
    tp += hits;
    per_category += fmt(" %s %d/5", to_string(cat), hits);
  }
  for (std::uint64_t s = 1; s <= 20; ++s) fp += detect(run(300 + s), t.model, t.pinn).confirmed > 0 ? 1 : 0;
  return {tp >= 18 && fp <= 1,
          fmt("confirmed %d/20 attacks (%s), %d/20 benign runs confirmed, runtime %.1f s", tp,
              per_category.c_str() + 1, fp, seconds_since(t0))};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.ok ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.ok ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  Trained t;
  bool trained = false;
  try {
    t = train_all();
    trained = true;
  } catch (const std::exception& e) {
    std::printf("training error: %s\n", e.what());
  }
  auto need = [&](const std::function<Outcome(const Trained&)>& f) {
    return [&, f] { return trained ? f(t) : Outcome{false, "no trained models"}; };
  };

  report(1, "oldsmar case study", need(oldsmar_case));
  report(2, "mimicry case study", need(mimicry_case));
  report(3, "cause before effect", preceding_case);
  report(4, "calibration resilience", calibration_case);
  report(5, "inertia time block", itb_case);
  report(6, "gradient check", gradient_case);
  report(7, "physics loss ordering", pde_ordering_case);
  report(8, "oracle equivalence", oracle_case);
  report(9, "threshold semantics", need(threshold_case));
  report(10, "detection rate", need(detection_case));
  return failed == 0 ? 0 : 1;
}
