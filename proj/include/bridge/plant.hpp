#pragma once

// Inertial tank plant with a SCADA level-control handler and attack injection.
//
// Each cycle the handler opens the intake, supervises the PLC gain P while the
// tank fills towards S_V, then stops the pump, opens the dosing outlet and
// closes it once the tank is drained. Actuators follow their commanded state
// through a first-order lag.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bridge/trace.hpp"

namespace bridge {

enum class DeviceKind { valve, pump, sensor, param };

struct PlantTags {
  std::string level = "L.Meter.0";
  std::string supply = "Supply.0";
  std::string pump = "Pump.0";
  std::string intake_valve = "Valve.0";
  std::string discharge_valve = "Valve.1";
  std::string outlet_valve = "Valve.2";
  std::string gain = "P.0";
  std::string tank = "Tank.0";
};

struct ScenarioConfig {
  std::string name = "dosing";
  std::string event = "LevelControl";
  PlantTags tags;
  double setpoint = 2.35;  // S_V
  double gain_min = 1.5;   // benign P is drawn per cycle from [gain_min, gain_max]
  double gain_max = 4.0;
  std::map<std::string, double> tau;  // per actuator tag, seconds
  double noise = 0.01;                // sensor noise, full width as a fraction of range
  double scan_cycles_per_second = 1000.0;
  int cycles = 6;
  std::optional<double> duration;  // seconds; unset runs until `cycles` complete
  std::uint64_t seed = 7;

  double tau_of(const std::string& tag) const;
  std::vector<std::string> actuator_tags() const;
  std::vector<std::string> all_tags() const;
  DeviceKind kind_of(const std::string& tag) const;
  void validate() const;
};

// Default τ for a given inertia delay: the lag decays to 5% of its rate after
// τ·ln(20) seconds.
double tau_for_inertia(double inertia_seconds);

// Dosing scenario with every actuator lag set from `inertia_seconds`.
ScenarioConfig dosing_scenario(double inertia_seconds = 4.7);
ScenarioConfig conveyor_scenario(double inertia_seconds = 7.0);

enum class AttackCategory { oldsmar, stealth_increment, toggle, mimicry };

const char* to_string(AttackCategory category);
AttackCategory attack_category_from_string(std::string_view text);

struct AttackSpec {
  AttackCategory category = AttackCategory::oldsmar;
  std::vector<std::string> targets;
  double start = 30.0;   // the first cycle beginning at or after this time is attacked
  double offset = 1.0;   // injected writes begin this long after the cycle starts
  double increment = 0.3;  // STEALTH_INCREMENT fraction f
  double interval = 1.0;   // STEALTH_INCREMENT spacing n, seconds
  int count = 5;           // injected writes (STEALTH_INCREMENT, TOGGLE)
  double period = 2.0;     // TOGGLE spacing, seconds
  double high_gain = 6.0;  // OLDSMAR gain
  double outlet_delay = 25.0;  // OLDSMAR: seconds from intake open to outlet open

  // Resolves default targets and checks parameters against the scenario.
  void validate(const ScenarioConfig& cfg) const;
  std::vector<std::string> resolved_targets(const ScenarioConfig& cfg) const;
};

struct AttackLabel {
  std::string domain;  // "scada" or "process"
  double start = 0.0;  // seconds
  double end = 0.0;
};

struct SimOutput {
  ScenarioConfig config;
  std::optional<AttackSpec> attack;
  Trace trace;
  Series series;
  std::vector<AttackLabel> labels;
  EventSet events;
  std::vector<double> cycle_starts;  // seconds
};

SimOutput simulate(const ScenarioConfig& cfg, const std::optional<AttackSpec>& attack = {});
SimOutput inject_attack(const AttackSpec& spec, const SimOutput& benign);
std::vector<SimOutput> sweep_setpoints(const ScenarioConfig& cfg,
                                       const std::vector<double>& setpoints);

ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& cfg);
AttackSpec attack_from_json(const std::string& text);
AttackSpec load_attack(const std::string& path);
std::string attack_to_json(const AttackSpec& spec);

std::string labels_to_json(const std::vector<AttackLabel>& labels);
std::vector<AttackLabel> labels_from_json(const std::string& text);

}  // namespace bridge
