#pragma once

// Relative-dependency (R_D) constraints: coefficient-of-variation summaries of
// control-time, control-burst and control-frequency features per event.

#include <map>
#include <string>
#include <vector>

#include "bridge/dependency.hpp"

namespace bridge {

inline constexpr const char* kConstraintSchema = "bridge-constraints/1";

struct TimeConstraint {
  double rd = 0.0;             // R_DΔ
  double mean_interval = 0.0;  // scan cycles
  double epsilon = 0.0;
  std::size_t samples = 0;
  bool operator==(const TimeConstraint&) const = default;
};

struct BurstConstraint {
  double rd = 0.0;  // R_Dμ
  double mean_burst = 0.0;
  double lambda = 0.0;  // dominance of the modal burst size
  std::size_t samples = 0;
  bool operator==(const BurstConstraint&) const = default;
};

struct EventConstraints {
  std::map<DevicePair, TimeConstraint> control_time;
  std::map<std::string, BurstConstraint> control_burst;
  std::map<std::string, double> control_freq;  // R_DϜ
  std::vector<DevicePair> unmodeled_pairs;
  std::vector<std::string> unmodeled_bursts;
  std::size_t operations = 0;
  bool operator==(const EventConstraints&) const = default;
};

struct ConstraintModel {
  std::map<std::string, EventConstraints> events;
  std::size_t training_operations = 0;
  std::vector<std::string> warnings;

  const EventConstraints* find(const std::string& event) const;
  bool operator==(const ConstraintModel&) const = default;
};

struct ConstraintOptions {
  // Add ε to the interval deviation. Off gives the pure, scale-free CV.
  bool use_epsilon = true;
  // Add 1 − λ (rarity of the modal burst size) instead of λ itself, so a
  // perfectly regular burst pattern gets R_Dμ = 0.
  bool lambda_complement = true;
};

// Population mean and standard deviation.
double mean(const std::vector<double>& values);
double population_sd(const std::vector<double>& values);

// ε(i,j) = occurrences(i→j) / Σ_x occurrences(x→j).
double degree_of_dependency(const DependencyGraph& graph, const std::string& i,
                            const std::string& j);

// λ(s) = count(size == s) / count(all bursts).
double degree_of_dominance(const std::vector<int>& bursts, int size);
// Most frequent burst size; ties go to the smaller size.
int modal_burst(const std::vector<int>& bursts);

double rd_delta(const std::vector<double>& samples, double epsilon);
double rd_mu(const std::vector<int>& bursts, double lambda);
double rd_freq(long count, long total);

ConstraintModel build_constraint_model(const std::vector<ProcessControlOperation>& ops,
                                       const ConstraintOptions& options = {});

struct DispersionEntry {
  std::string key;  // "<event>|<kind>|<devices>"
  double mean = 0.0;
  double sd = 0.0;
  std::size_t models = 0;
};

struct DispersionReport {
  std::vector<DispersionEntry> entries;
  std::vector<std::string> missing;  // keys absent from at least one model
};

DispersionReport dispersion_across_calibrations(const std::vector<ConstraintModel>& models);

std::string model_to_json(const ConstraintModel& model);
ConstraintModel model_from_json(const std::string& text);
void save_model(const std::string& path, const ConstraintModel& model);
ConstraintModel load_model(const std::string& path);

}  // namespace bridge
