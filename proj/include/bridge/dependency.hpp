#pragma once

// Read-before-Write dependencies and the per-operation time, burst and
// frequency features derived from them.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bridge/trace.hpp"

namespace bridge {

using DevicePair = std::pair<std::string, std::string>;  // (i, j): i read, j written

struct RbwDependency {
  std::string src;  // i, the monitored device
  std::string dst;  // j, the written device
  std::vector<std::pair<std::int64_t, std::int64_t>> occurrences;  // (ts_read, ts_write)
};

struct FeatureSet {
  std::string event;
  std::map<DevicePair, std::vector<double>> intervals;
  std::map<std::string, std::vector<int>> bursts;
  std::map<std::string, int> freq;
  int op_len = 0;

  bool operator==(const FeatureSet&) const = default;
};

struct DependencyEdge {
  std::string src;
  std::string dst;
  std::size_t occurrences = 0;
  std::vector<double> intervals;
};

struct DependencyGraph {
  std::vector<std::string> nodes;               // sorted
  std::map<DevicePair, DependencyEdge> edges;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }
  std::size_t in_degree(const std::string& tag) const;
  std::size_t out_degree(const std::string& tag) const;
};

// For each WRITE, the device of the last READ strictly before it in the
// operation governs the write. Groups are returned in first-seen order.
std::vector<RbwDependency> extract_rbw(const ProcessControlOperation& op);

// Δ(i,j) per dependent write: distance from the nearest earlier WRITE on i
// (or the governing READ on i when i was never written) to the write on j.
std::map<DevicePair, std::vector<double>> control_time_samples(
    const std::vector<RbwDependency>& deps, const ProcessControlOperation& op);

// Maximal runs of consecutive WRITEs to one device. Any READ or a WRITE to
// another device ends the run.
std::map<std::string, std::vector<int>> burst_sizes(const ProcessControlOperation& op);

struct FrequencyCount {
  int count = 0;  // |C_i|
  int total = 0;  // |P(V_k)|
  bool operator==(const FrequencyCount&) const = default;
};
std::map<std::string, FrequencyCount> control_frequency(const ProcessControlOperation& op);

FeatureSet extract_features(const ProcessControlOperation& op);

DependencyGraph build_graph(const std::vector<ProcessControlOperation>& ops);

std::string graph_to_json(const DependencyGraph& graph);
std::string graph_to_dot(const DependencyGraph& graph);

}  // namespace bridge
