#include "bridge/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

namespace {

constexpr double kInflow = 0.25;       // tank volume per second at full intake
constexpr double kDischarge = 0.5;     // Valve.1 outflow coefficient
constexpr double kOutlet = 1.0;        // Valve.2 outflow coefficient
constexpr double kMixTau = 20.0;       // supply-line mixing time constant, seconds
constexpr double kDirect = 3.0;        // extra concentration while pump feeds an open outlet
constexpr double kDrainFraction = 0.02;
constexpr double kCycleSeconds = 29.8;  // level-control duration per unit of setpoint
constexpr int kSubsteps = 10;
constexpr double kFirstCycle = 2.0;
constexpr double kIdleGap = 3.0;
constexpr std::int64_t kStep = 3;  // scan cycles between handler commands
constexpr double kDecay = 0.05;
constexpr double kSupplyRange = 0.1;  // nominal span of the supply concentration reading

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double tau_for_inertia(double inertia_seconds) {
  return inertia_seconds / std::log(1.0 / kDecay);
}

double ScenarioConfig::tau_of(const std::string& tag) const {
  auto it = tau.find(tag);
  return it == tau.end() ? tau_for_inertia(4.7) : it->second;
}

std::vector<std::string> ScenarioConfig::actuator_tags() const {
  return {tags.pump, tags.intake_valve, tags.discharge_valve, tags.outlet_valve};
}

std::vector<std::string> ScenarioConfig::all_tags() const {
  return {tags.level,        tags.supply,          tags.pump, tags.intake_valve,
          tags.discharge_valve, tags.outlet_valve, tags.gain, tags.tank};
}

DeviceKind ScenarioConfig::kind_of(const std::string& tag) const {
  if (tag == tags.pump) return DeviceKind::pump;
  if (tag == tags.intake_valve || tag == tags.discharge_valve || tag == tags.outlet_valve) {
    return DeviceKind::valve;
  }
  if (tag == tags.gain) return DeviceKind::param;
  return DeviceKind::sensor;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  if (!(setpoint > 0.0)) fail("setpoint must be > 0");
  if (!(gain_min > 0.0) || gain_max < gain_min) fail("gain range must satisfy 0 < min <= max");
  for (const auto& tag : actuator_tags()) {
    if (!(tau_of(tag) > 0.0)) fail("tau for '" + tag + "' must be > 0");
  }
  if (noise < 0.0) fail("noise must be >= 0");
  if (!(scan_cycles_per_second > 0.0)) fail("scan_cycles_per_second must be > 0");
  if (cycles < 0) fail("cycles must be >= 0");
  if (duration && *duration < 0.0) fail("duration must be >= 0");
  auto all = all_tags();
  std::set<std::string> unique(all.begin(), all.end());
  if (unique.size() != all.size()) fail("device tags must be distinct");
  if (event.empty()) fail("event tag must not be empty");
}

ScenarioConfig dosing_scenario(double inertia_seconds) {
  ScenarioConfig cfg;
  for (const auto& tag : cfg.actuator_tags()) cfg.tau[tag] = tau_for_inertia(inertia_seconds);
  return cfg;
}

ScenarioConfig conveyor_scenario(double inertia_seconds) {
  ScenarioConfig cfg;
  cfg.name = "conveyor";
  cfg.event = "HopperFill";
  cfg.tags.level = "W.Meter.0";
  cfg.tags.supply = "Belt.Load.0";
  cfg.tags.pump = "Feeder.0";
  cfg.tags.intake_valve = "Gate.0";
  cfg.tags.discharge_valve = "Gate.1";
  cfg.tags.outlet_valve = "Gate.2";
  cfg.tags.gain = "K.0";
  cfg.tags.tank = "Hopper.0";
  cfg.setpoint = 4.0;
  for (const auto& tag : cfg.actuator_tags()) cfg.tau[tag] = tau_for_inertia(inertia_seconds);
  return cfg;
}

const char* to_string(AttackCategory category) {
  switch (category) {
    case AttackCategory::oldsmar: return "OLDSMAR";
    case AttackCategory::stealth_increment: return "STEALTH_INCREMENT";
    case AttackCategory::toggle: return "TOGGLE";
    case AttackCategory::mimicry: return "MIMICRY";
  }
  return "?";
}

AttackCategory attack_category_from_string(std::string_view text) {
  if (text == "OLDSMAR") return AttackCategory::oldsmar;
  if (text == "STEALTH_INCREMENT") return AttackCategory::stealth_increment;
  if (text == "TOGGLE") return AttackCategory::toggle;
  if (text == "MIMICRY") return AttackCategory::mimicry;
  throw Error(ErrorCode::config, "unknown attack category '" + std::string(text) + "'");
}

std::vector<std::string> AttackSpec::resolved_targets(const ScenarioConfig& cfg) const {
  if (!targets.empty()) return targets;
  switch (category) {
    case AttackCategory::oldsmar: return {cfg.tags.intake_valve, cfg.tags.outlet_valve};
    case AttackCategory::stealth_increment: return {cfg.tags.gain};
    case AttackCategory::toggle: return {cfg.tags.pump};
    case AttackCategory::mimicry: return {cfg.tags.gain};
  }
  return {};
}

void AttackSpec::validate(const ScenarioConfig& cfg) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  const auto all = cfg.all_tags();
  for (const auto& t : resolved_targets(cfg)) {
    if (std::find(all.begin(), all.end(), t) == all.end()) fail("unknown target tag '" + t + "'");
    if (cfg.kind_of(t) == DeviceKind::sensor) fail("target '" + t + "' is not writable");
  }
  if (start < 0.0) fail("attack start must be >= 0");
  if (cfg.duration && start > *cfg.duration) fail("attack start is beyond the run duration");
  if (offset < 0.0) fail("attack offset must be >= 0");
  switch (category) {
    case AttackCategory::toggle:
      if (!(period > 0.0)) fail("toggle period must be > 0");
      if (count < 1) fail("toggle count must be >= 1");
      break;
    case AttackCategory::stealth_increment:
      if (!(interval > 0.0)) fail("increment interval must be > 0");
      if (count < 1) fail("increment count must be >= 1");
      if (increment <= -1.0) fail("increment fraction must be > -1");
      break;
    case AttackCategory::oldsmar:
      if (!(high_gain > 0.0)) fail("high_gain must be > 0");
      if (!(outlet_delay > 0.0)) fail("outlet_delay must be > 0");
      break;
    case AttackCategory::mimicry:
      break;
  }
}

namespace {

enum class Action { none, marker, arm_drain, increment };

struct Planned {
  std::int64_t ts;
  Op op;
  std::string tag;
  double value = 0.0;
  Action action = Action::none;
  bool attack = false;
};

class Simulator {
 public:
  Simulator(const ScenarioConfig& cfg, const std::optional<AttackSpec>& attack)
      : cfg_(cfg), attack_(attack), rng_(cfg.seed) {
    cfg_.validate();
    if (attack_) attack_->validate(cfg_);
    t_lc_ = std::max(10.0, std::round(kCycleSeconds * cfg_.setpoint));
    for (const auto& tag : cfg_.actuator_tags()) {
      effective_[tag] = 0.0;
      commanded_[tag] = 0.0;
    }
    commanded_[cfg_.tags.gain] = 0.5 * (cfg_.gain_min + cfg_.gain_max);
  }

  SimOutput run() {
    SimOutput out;
    out.config = cfg_;
    out.attack = attack_;
    out.trace.header.scan_cycles_per_second = cfg_.scan_cycles_per_second;
    out.events.events.push_back({cfg_.event, cfg_.tags.tank + ".empty"});
    out.series.tags = {cfg_.tags.level,           cfg_.tags.pump,         cfg_.tags.intake_valve,
                       cfg_.tags.discharge_valve, cfg_.tags.outlet_valve, cfg_.tags.supply};

    if (cfg_.duration && *cfg_.duration <= 0.0) return out;
    if (cfg_.cycles > 0) {
      schedule_cycle(kFirstCycle);
    } else {
      finished_ = true;
    }

    const double h = 1.0 / kSubsteps;
    for (std::int64_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * h;
      if (cfg_.duration ? t > *cfg_.duration + 1e-9 : (finished_ && t > end_time_ + 1e-9)) break;
      if (t > 1e6) throw Error(ErrorCode::simulation, "run did not terminate within 1e6 s");

      if (next_cycle_ && t + 1e-9 >= *next_cycle_) {
        const double start = *next_cycle_;
        next_cycle_.reset();
        start_cycle(start);
      }
      apply_due(t, out);

      if (k % kSubsteps == 0) {
        check_drain(t);
        apply_due(t, out);
        out.series.frames.push_back(frame(t));
      }
      integrate(h);
    }

    out.cycle_starts = cycle_starts_;
    if (attack_) {
      if (!attack_cycle_start_) {
        throw Error(ErrorCode::config, "no cycle starts at or after the attack start");
      }
      if (first_attack_ts_) {
        const double a = *first_attack_ts_ / cfg_.scan_cycles_per_second;
        const double b = *last_attack_ts_ / cfg_.scan_cycles_per_second;
        out.labels.push_back({"scada", a, b});
        out.labels.push_back({"process", a, std::max(b, attack_cycle_end_)});
      }
    }
    return out;
  }

 private:
  std::int64_t to_ts(double seconds) const {
    return static_cast<std::int64_t>(std::llround(seconds * cfg_.scan_cycles_per_second));
  }

  double draw_gain() {
    std::uniform_real_distribution<double> d(cfg_.gain_min, cfg_.gain_max);
    return d(rng_);
  }

  double noise(double range) {
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    return cfg_.noise * range * d(rng_);
  }

  void add(std::int64_t ts, Op op, const std::string& tag, double value = 0.0,
           Action action = Action::none, bool attack = false) {
    planned_.push_back({ts, op, tag, value, action, attack});
  }

  void schedule_cycle(double start) {
    if (cycles_started_ >= cfg_.cycles) {
      finished_ = true;
      end_time_ = start;
      return;
    }
    if (cfg_.duration && start + t_lc_ + 30.0 > *cfg_.duration) {
      finished_ = true;
      end_time_ = *cfg_.duration;
      return;
    }
    next_cycle_ = start;
  }

  void start_cycle(double start) {
    ++cycles_started_;
    cycle_starts_.push_back(start);
    const bool attacked = attack_ && !attack_cycle_start_ && start + 1e-9 >= attack_->start;
    if (attacked) attack_cycle_start_ = start;
    in_attack_cycle_ = attacked;

    const std::int64_t base = to_ts(start);
    const double gain = draw_gain();
    add(base, Op::event, cfg_.tags.tank, 0.0, Action::marker);

    const auto& tg = cfg_.tags;
    const std::int64_t lc = to_ts(t_lc_);
    if (attacked && attack_->category == AttackCategory::mimicry) {
      plan_mimicry(base, lc, gain);
      attack_cycle_end_ = start + t_lc_ + 10.0;
      in_attack_cycle_ = false;
      schedule_cycle(start + t_lc_ + 10.0);
      return;
    }

    add(base, Op::read, tg.intake_valve);
    add(base + kStep, Op::write, tg.pump, 1.0);
    add(base + 2 * kStep, Op::read, tg.level);
    add(base + 3 * kStep, Op::write, tg.intake_valve, 1.0);

    const bool oldsmar = attacked && attack_->category == AttackCategory::oldsmar;
    const std::int64_t open =
        oldsmar ? base + 3 * kStep + to_ts(attack_->outlet_delay) : base + lc;
    // The hijacked gain takes effect once the outlet has been opened early.
    for (int k = 1; k <= 6; ++k) {
      const std::int64_t tk = base + to_ts(t_lc_ * k / 7.0);
      const bool hijacked = oldsmar && tk >= open;
      add(tk, Op::read, tg.level);
      add(tk + kStep, Op::write, tg.gain, hijacked ? attack_->high_gain : gain, Action::none,
          hijacked);
    }

    const std::int64_t end = base + lc;
    if (oldsmar) {
      add(open - kStep, Op::read, tg.intake_valve, 0.0, Action::none, true);
      add(open, Op::write, tg.outlet_valve, 1.0, Action::none, true);
      add(end, Op::read, tg.level);
      add(end + kStep, Op::write, tg.pump, 0.0, Action::arm_drain);
      add(end + 2 * kStep, Op::read, tg.level);
      add(end + 3 * kStep, Op::write, tg.intake_valve, 0.0);
    } else {
      add(end, Op::read, tg.level);
      add(end + kStep, Op::write, tg.pump, 0.0, Action::arm_drain);
      add(end + 2 * kStep, Op::read, tg.intake_valve);
      add(end + 3 * kStep, Op::write, tg.outlet_valve, 1.0);
      add(end + 4 * kStep, Op::read, tg.level);
      add(end + 5 * kStep, Op::write, tg.intake_valve, 0.0);
    }

    if (attacked && attack_->category == AttackCategory::stealth_increment) {
      const auto target = attack_->resolved_targets(cfg_).front();
      for (int m = 0; m < attack_->count; ++m) {
        add(base + to_ts(attack_->offset + m * attack_->interval), Op::write, target, 0.0,
            Action::increment, true);
      }
    }
    if (attacked && attack_->category == AttackCategory::toggle) {
      const auto target = attack_->resolved_targets(cfg_).front();
      for (int m = 0; m < attack_->count; ++m) {
        add(base + to_ts(attack_->offset + m * attack_->period), Op::write, target,
            m % 2 == 0 ? 0.0 : 1.0, Action::none, true);
      }
    }
    std::stable_sort(planned_.begin(), planned_.end(),
                     [](const Planned& a, const Planned& b) { return a.ts < b.ts; });
  }

  // Bursts of 2,3,2,3,2,3,3 gain writes around six legitimate-looking
  // commands, keeping every modeled control-time interval at its benign value.
  void plan_mimicry(std::int64_t base, std::int64_t lc, double gain) {
    const auto& tg = cfg_.tags;
    double p = gain;
    auto burst = [&](std::vector<std::int64_t> times) {
      for (auto ts : times) {
        p *= 1.1;
        add(ts, Op::write, tg.gain, p, Action::none, true);
      }
    };
    const std::int64_t x6 = base + 23 + lc;
    burst({base, base + 3});
    add(base + 10, Op::read, tg.level, 0.0, Action::none, true);
    burst({base + 13, base + 13, base + 13});
    add(base + 13, Op::write, tg.pump, 1.0, Action::none, true);
    burst({base + 13, base + 13});
    add(base + 20, Op::read, tg.level, 0.0, Action::none, true);
    burst({base + 23, base + 23, base + 23});
    add(base + 23, Op::write, tg.intake_valve, 1.0, Action::none, true);
    burst({base + 23, base + 23});
    add(x6 - 3, Op::read, tg.intake_valve, 0.0, Action::none, true);
    burst({x6 - 2, x6 - 1, x6 - 1});
    add(x6, Op::write, tg.outlet_valve, 1.0, Action::none, true);
    burst({x6 + 3, x6 + 6, x6 + 9});
    std::stable_sort(planned_.begin(), planned_.end(),
                     [](const Planned& a, const Planned& b) { return a.ts < b.ts; });
  }

  double measured(const std::string& tag) {
    if (tag == cfg_.tags.level) return std::max(0.0, level_ + noise(cfg_.setpoint));
    if (tag == cfg_.tags.supply) return std::max(0.0, supply_ + noise(kSupplyRange));
    if (tag == cfg_.tags.tank) return level_;
    auto it = commanded_.find(tag);
    return it == commanded_.end() ? 0.0 : it->second;
  }

  void apply_due(double t, SimOutput& out) {
    std::size_t n = 0;
    while (n < planned_.size() &&
           static_cast<double>(planned_[n].ts) / cfg_.scan_cycles_per_second <= t + 1e-9) {
      Planned& p = planned_[n];
      Command c;
      c.ts = p.ts;
      c.op = p.op;
      c.tag = p.tag;
      switch (p.op) {
        case Op::event:
          c.event = cfg_.event;
          break;
        case Op::read:
          c.value = measured(p.tag);
          break;
        case Op::write:
          if (p.action == Action::increment) p.value = commanded_[p.tag] * (1.0 + attack_->increment);
          c.value = p.value;
          commanded_[p.tag] = p.value;
          if (p.action == Action::arm_drain) drain_armed_ = true;
          break;
      }
      if (!out.trace.commands.empty() && out.trace.commands.back().ts > c.ts) {
        throw Error(ErrorCode::simulation, "handler produced out-of-order commands");
      }
      out.trace.commands.push_back(std::move(c));
      if (p.attack) {
        if (!first_attack_ts_) first_attack_ts_ = p.ts;
        last_attack_ts_ = p.ts;
      }
      ++n;
    }
    planned_.erase(planned_.begin(), planned_.begin() + static_cast<std::ptrdiff_t>(n));
  }

  void check_drain(double t) {
    if (!drain_armed_ || level_ >= kDrainFraction * cfg_.setpoint) return;
    drain_armed_ = false;
    const std::int64_t ts = to_ts(t);
    add(ts, Op::read, cfg_.tags.level);
    add(ts + kStep, Op::write, cfg_.tags.outlet_valve, 0.0);
    std::stable_sort(planned_.begin(), planned_.end(),
                     [](const Planned& a, const Planned& b) { return a.ts < b.ts; });
    if (in_attack_cycle_) {
      attack_cycle_end_ = t;
      in_attack_cycle_ = false;
    }
    schedule_cycle(t + kIdleGap);
  }

  SeriesFrame frame(double t) {
    const auto& tg = cfg_.tags;
    return {t,
            {std::max(0.0, level_ + noise(cfg_.setpoint)), effective_[tg.pump],
             effective_[tg.intake_valve], effective_[tg.discharge_valve],
             effective_[tg.outlet_valve], std::max(0.0, supply_ + noise(kSupplyRange))}};
  }

  void integrate(double h) {
    const auto& tg = cfg_.tags;
    const double sv = cfg_.setpoint;
    const double p = commanded_[tg.gain];
    const bool controlling = commanded_[tg.intake_valve] > 0.5;

    std::map<std::string, double> target;
    target[tg.pump] = clamp01(commanded_[tg.pump]);
    target[tg.intake_valve] = clamp01(commanded_[tg.intake_valve]) * clamp01(p * (sv - level_) / sv);
    target[tg.discharge_valve] = controlling ? clamp01(p * (level_ - sv) / sv) : 0.0;
    target[tg.outlet_valve] = clamp01(commanded_[tg.outlet_valve]);

    const double x_pump = effective_[tg.pump];
    const double x_in = effective_[tg.intake_valve];
    const double x_dis = effective_[tg.discharge_valve];
    const double x_out = effective_[tg.outlet_valve];

    const double inflow = kInflow * x_pump * x_in;
    const double outflow = (kDischarge * x_dis + kOutlet * x_out) * level_;
    level_ = std::max(0.0, level_ + h * (inflow - outflow));

    const double line = x_out * (level_ / sv) * (1.0 + kDirect * x_pump);
    supply_ += (line - supply_) * (1.0 - std::exp(-h / kMixTau));

    for (const auto& tag : cfg_.actuator_tags()) {
      const double a = 1.0 - std::exp(-h / cfg_.tau_of(tag));
      effective_[tag] += (target[tag] - effective_[tag]) * a;
    }
    if (!std::isfinite(level_) || !std::isfinite(supply_) || level_ > 1e6) {
      throw Error(ErrorCode::simulation, "tank level diverged (level=" +
                                             std::to_string(level_) + ")");
    }
  }

  ScenarioConfig cfg_;
  std::optional<AttackSpec> attack_;
  std::mt19937_64 rng_;
  double t_lc_ = 0.0;

  double level_ = 0.0;
  double supply_ = 0.0;
  std::map<std::string, double> effective_;
  std::map<std::string, double> commanded_;

  std::vector<Planned> planned_;
  bool drain_armed_ = false;
  int cycles_started_ = 0;
  std::optional<double> next_cycle_;
  bool finished_ = false;
  double end_time_ = 0.0;
  std::vector<double> cycle_starts_;

  std::optional<double> attack_cycle_start_;
  bool in_attack_cycle_ = false;
  double attack_cycle_end_ = 0.0;
  std::optional<std::int64_t> first_attack_ts_;
  std::optional<std::int64_t> last_attack_ts_;
};

}  // namespace

SimOutput simulate(const ScenarioConfig& cfg, const std::optional<AttackSpec>& attack) {
  return Simulator(cfg, attack).run();
}

SimOutput inject_attack(const AttackSpec& spec, const SimOutput& benign) {
  return simulate(benign.config, spec);
}

std::vector<SimOutput> sweep_setpoints(const ScenarioConfig& cfg,
                                       const std::vector<double>& setpoints) {
  std::vector<SimOutput> out;
  for (std::size_t k = 0; k < setpoints.size(); ++k) {
    if (!(setpoints[k] > 0.0)) throw Error(ErrorCode::config, "setpoints must be > 0");
  }
  for (std::size_t k = 0; k < setpoints.size(); ++k) {
    ScenarioConfig run = cfg;
    run.setpoint = setpoints[k];
    run.seed = cfg.seed + k;
    out.push_back(simulate(run));
  }
  return out;
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const std::string name = j.value("name", std::string("dosing"));
    const double inertia = j.value("inertia_seconds", name == "conveyor" ? 7.0 : 4.7);
    ScenarioConfig cfg = name == "conveyor" ? conveyor_scenario(inertia) : dosing_scenario(inertia);
    cfg.name = name;
    read_opt(j, "event", cfg.event);
    read_opt(j, "setpoint", cfg.setpoint);
    read_opt(j, "gain_min", cfg.gain_min);
    read_opt(j, "gain_max", cfg.gain_max);
    read_opt(j, "noise", cfg.noise);
    read_opt(j, "scan_cycles_per_second", cfg.scan_cycles_per_second);
    read_opt(j, "cycles", cfg.cycles);
    read_opt(j, "seed", cfg.seed);
    if (j.contains("duration") && !j.at("duration").is_null()) {
      cfg.duration = j.at("duration").get<double>();
    }
    if (j.contains("tags")) {
      const auto& t = j.at("tags");
      read_opt(t, "level", cfg.tags.level);
      read_opt(t, "supply", cfg.tags.supply);
      read_opt(t, "pump", cfg.tags.pump);
      read_opt(t, "intake_valve", cfg.tags.intake_valve);
      read_opt(t, "discharge_valve", cfg.tags.discharge_valve);
      read_opt(t, "outlet_valve", cfg.tags.outlet_valve);
      read_opt(t, "gain", cfg.tags.gain);
      read_opt(t, "tank", cfg.tags.tank);
      cfg.tau.clear();
      for (const auto& tag : cfg.actuator_tags()) cfg.tau[tag] = tau_for_inertia(inertia);
    }
    if (j.contains("tau")) {
      const auto& t = j.at("tau");
      if (t.is_number()) {
        for (const auto& tag : cfg.actuator_tags()) cfg.tau[tag] = t.get<double>();
      } else {
        for (const auto& [tag, v] : t.items()) cfg.tau[tag] = v.get<double>();
      }
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("scenario config: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) { return scenario_from_json(slurp(path)); }

std::string scenario_to_json(const ScenarioConfig& cfg) {
  ojson j;
  j["name"] = cfg.name;
  j["event"] = cfg.event;
  j["setpoint"] = cfg.setpoint;
  j["gain_min"] = cfg.gain_min;
  j["gain_max"] = cfg.gain_max;
  j["noise"] = cfg.noise;
  j["scan_cycles_per_second"] = cfg.scan_cycles_per_second;
  j["cycles"] = cfg.cycles;
  if (cfg.duration) j["duration"] = *cfg.duration;
  j["seed"] = cfg.seed;
  j["tags"] = {{"level", cfg.tags.level},
               {"supply", cfg.tags.supply},
               {"pump", cfg.tags.pump},
               {"intake_valve", cfg.tags.intake_valve},
               {"discharge_valve", cfg.tags.discharge_valve},
               {"outlet_valve", cfg.tags.outlet_valve},
               {"gain", cfg.tags.gain},
               {"tank", cfg.tags.tank}};
  ojson tau = ojson::object();
  for (const auto& tag : cfg.actuator_tags()) tau[tag] = cfg.tau_of(tag);
  j["tau"] = tau;
  return j.dump(2);
}

AttackSpec attack_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    AttackSpec spec;
    spec.category = attack_category_from_string(j.at("category").get<std::string>());
    read_opt(j, "targets", spec.targets);
    read_opt(j, "start", spec.start);
    read_opt(j, "offset", spec.offset);
    read_opt(j, "increment", spec.increment);
    read_opt(j, "interval", spec.interval);
    read_opt(j, "count", spec.count);
    read_opt(j, "period", spec.period);
    read_opt(j, "high_gain", spec.high_gain);
    read_opt(j, "outlet_delay", spec.outlet_delay);
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("attack config: ") + e.what());
  }
}

AttackSpec load_attack(const std::string& path) { return attack_from_json(slurp(path)); }

std::string attack_to_json(const AttackSpec& spec) {
  ojson j;
  j["category"] = to_string(spec.category);
  j["targets"] = spec.targets;
  j["start"] = spec.start;
  j["offset"] = spec.offset;
  j["increment"] = spec.increment;
  j["interval"] = spec.interval;
  j["count"] = spec.count;
  j["period"] = spec.period;
  j["high_gain"] = spec.high_gain;
  j["outlet_delay"] = spec.outlet_delay;
  return j.dump(2);
}

std::string labels_to_json(const std::vector<AttackLabel>& labels) {
  ojson j = ojson::array();
  for (const auto& l : labels) j.push_back({{"domain", l.domain}, {"start", l.start}, {"end", l.end}});
  return j.dump(2);
}

std::vector<AttackLabel> labels_from_json(const std::string& text) {
  try {
    std::vector<AttackLabel> out;
    for (const auto& l : json::parse(text)) {
      out.push_back({l.at("domain").get<std::string>(), l.at("start").get<double>(),
                     l.at("end").get<double>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("labels: ") + e.what());
  }
}

}  // namespace bridge
