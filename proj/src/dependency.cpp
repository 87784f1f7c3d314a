#include "bridge/dependency.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace bridge {

std::vector<RbwDependency> extract_rbw(const ProcessControlOperation& op) {
  std::vector<RbwDependency> out;
  std::map<DevicePair, std::size_t> index;
  // `governing` is the last READ with ts strictly below the current scan
  // cycle; `pending` is the last READ seen inside the current cycle.
  const Command* governing = nullptr;
  const Command* pending = nullptr;
  for (const auto& c : op.commands) {
    if (pending != nullptr && pending->ts < c.ts) {
      governing = pending;
      pending = nullptr;
    }
    if (c.op == Op::read) {
      pending = &c;
      continue;
    }
    if (c.op != Op::write || governing == nullptr) continue;
    DevicePair key{governing->tag, c.tag};
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back({key.first, key.second, {}});
    out[it->second].occurrences.emplace_back(governing->ts, c.ts);
  }
  return out;
}

std::map<DevicePair, std::vector<double>> control_time_samples(
    const std::vector<RbwDependency>& deps, const ProcessControlOperation& op) {
  // Write timestamps per device, in trace order.
  std::unordered_map<std::string, std::vector<std::int64_t>> writes;
  for (const auto& c : op.commands) {
    if (c.op == Op::write) writes[c.tag].push_back(c.ts);
  }

  std::map<DevicePair, std::vector<double>> out;
  for (const auto& dep : deps) {
    auto& samples = out[{dep.src, dep.dst}];
    const auto found = writes.find(dep.src);
    for (const auto& [ts_read, ts_write] : dep.occurrences) {
      std::int64_t anchor = ts_read;
      if (found != writes.end()) {
        const auto& w = found->second;
        auto it = std::lower_bound(w.begin(), w.end(), ts_write);
        if (it != w.begin()) anchor = *std::prev(it);
      }
      samples.push_back(static_cast<double>(ts_write > anchor ? ts_write - anchor
                                                              : anchor - ts_write));
    }
  }
  return out;
}

std::map<std::string, std::vector<int>> burst_sizes(const ProcessControlOperation& op) {
  std::map<std::string, std::vector<int>> out;
  const std::string* current = nullptr;
  int run = 0;
  auto close = [&] {
    if (current != nullptr && run > 0) out[*current].push_back(run);
    current = nullptr;
    run = 0;
  };
  for (const auto& c : op.commands) {
    if (c.op != Op::write) {
      close();
      continue;
    }
    if (current != nullptr && *current == c.tag) {
      ++run;
    } else {
      close();
      current = &c.tag;
      run = 1;
    }
  }
  close();
  return out;
}

std::map<std::string, FrequencyCount> control_frequency(const ProcessControlOperation& op) {
  std::map<std::string, FrequencyCount> out;
  int total = 0;
  for (const auto& c : op.commands) {
    if (c.is_marker()) continue;
    ++total;
    if (c.op == Op::write) ++out[c.tag].count;
  }
  for (auto& [tag, f] : out) f.total = total;
  return out;
}

FeatureSet extract_features(const ProcessControlOperation& op) {
  FeatureSet f;
  f.event = op.event;
  f.intervals = control_time_samples(extract_rbw(op), op);
  f.bursts = burst_sizes(op);
  for (const auto& [tag, fc] : control_frequency(op)) f.freq[tag] = fc.count;
  f.op_len = static_cast<int>(std::count_if(op.commands.begin(), op.commands.end(),
                                            [](const Command& c) { return !c.is_marker(); }));
  return f;
}

std::size_t DependencyGraph::in_degree(const std::string& tag) const {
  return std::count_if(edges.begin(), edges.end(),
                       [&](const auto& e) { return e.first.second == tag; });
}

std::size_t DependencyGraph::out_degree(const std::string& tag) const {
  return std::count_if(edges.begin(), edges.end(),
                       [&](const auto& e) { return e.first.first == tag; });
}

DependencyGraph build_graph(const std::vector<ProcessControlOperation>& ops) {
  DependencyGraph g;
  std::set<std::string> nodes;
  for (const auto& op : ops) {
    auto deps = extract_rbw(op);
    auto samples = control_time_samples(deps, op);
    for (const auto& dep : deps) {
      DevicePair key{dep.src, dep.dst};
      auto& edge = g.edges[key];
      edge.src = dep.src;
      edge.dst = dep.dst;
      edge.occurrences += dep.occurrences.size();
      const auto& s = samples[key];
      edge.intervals.insert(edge.intervals.end(), s.begin(), s.end());
      nodes.insert(dep.src);
      nodes.insert(dep.dst);
    }
  }
  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

std::string graph_to_json(const DependencyGraph& graph) {
  nlohmann::ordered_json j;
  j["nodes"] = graph.nodes;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, e] : graph.edges) {
    nlohmann::ordered_json edge;
    edge["src"] = e.src;
    edge["dst"] = e.dst;
    edge["occurrences"] = e.occurrences;
    edge["intervals"] = e.intervals;
    j["edges"].push_back(std::move(edge));
  }
  j["node_count"] = graph.node_count();
  j["edge_count"] = graph.edge_count();
  return j.dump(2);
}

std::string graph_to_dot(const DependencyGraph& graph) {
  std::ostringstream out;
  out << "digraph rbw {\n";
  for (const auto& n : graph.nodes) out << "  \"" << n << "\";\n";
  for (const auto& [key, e] : graph.edges) {
    out << "  \"" << e.src << "\" -> \"" << e.dst << "\" [label=\"" << e.occurrences
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace bridge
