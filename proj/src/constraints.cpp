#include "bridge/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

const EventConstraints* ConstraintModel::find(const std::string& event) const {
  auto it = events.find(event);
  return it == events.end() ? nullptr : &it->second;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_sd(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

double degree_of_dependency(const DependencyGraph& graph, const std::string& i,
                            const std::string& j) {
  std::size_t own = 0;
  std::size_t all = 0;
  for (const auto& [key, edge] : graph.edges) {
    if (key.second != j) continue;
    all += edge.occurrences;
    if (key.first == i) own += edge.occurrences;
  }
  if (all == 0) {
    throw Error(ErrorCode::insufficient_data, "no dependency observed for '" + j + "'");
  }
  return static_cast<double>(own) / static_cast<double>(all);
}

double degree_of_dominance(const std::vector<int>& bursts, int size) {
  if (bursts.empty()) throw Error(ErrorCode::insufficient_data, "empty burst list");
  const auto hits = std::count(bursts.begin(), bursts.end(), size);
  return static_cast<double>(hits) / static_cast<double>(bursts.size());
}

int modal_burst(const std::vector<int>& bursts) {
  if (bursts.empty()) throw Error(ErrorCode::insufficient_data, "empty burst list");
  std::map<int, std::size_t> counts;
  for (int b : bursts) ++counts[b];
  int best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [size, n] : counts) {
    if (n > best_count) {
      best = size;
      best_count = n;
    }
  }
  return best;
}

namespace {

void require_cv_input(std::size_t n, double m) {
  if (n < 2) throw Error(ErrorCode::insufficient_data, "need at least 2 samples");
  if (m == 0.0) throw Error(ErrorCode::degenerate_data, "sample mean is zero");
}

std::vector<double> to_double(const std::vector<int>& values) {
  return {values.begin(), values.end()};
}

}  // namespace

double rd_delta(const std::vector<double>& samples, double epsilon) {
  const double m = mean(samples);
  require_cv_input(samples.size(), m);
  return (population_sd(samples) + epsilon) / m;
}

double rd_mu(const std::vector<int>& bursts, double lambda) {
  const auto values = to_double(bursts);
  const double m = mean(values);
  require_cv_input(values.size(), m);
  return (population_sd(values) + lambda) / m;
}

double rd_freq(long count, long total) {
  if (total <= 0) throw Error(ErrorCode::insufficient_data, "operation has no commands");
  if (count < 0 || count > total) {
    throw Error(ErrorCode::config, "frequency count outside [0, total]");
  }
  return static_cast<double>(count) / static_cast<double>(total);
}

ConstraintModel build_constraint_model(const std::vector<ProcessControlOperation>& ops,
                                       const ConstraintOptions& options) {
  ConstraintModel model;
  model.training_operations = ops.size();
  if (ops.empty()) {
    model.warnings.push_back("no training operations; model is empty");
    return model;
  }

  std::map<std::string, std::vector<const ProcessControlOperation*>> by_event;
  for (const auto& op : ops) by_event[op.event].push_back(&op);

  for (const auto& [event, event_ops] : by_event) {
    EventConstraints ec;
    ec.operations = event_ops.size();

    std::vector<ProcessControlOperation> copies;
    copies.reserve(event_ops.size());
    for (const auto* op : event_ops) copies.push_back(*op);
    const DependencyGraph graph = build_graph(copies);

    std::map<std::string, std::vector<int>> bursts;
    std::set<std::string> devices;
    std::vector<std::map<std::string, FrequencyCount>> freqs;
    for (const auto* op : event_ops) {
      for (const auto& [tag, sizes] : burst_sizes(*op)) {
        auto& pooled = bursts[tag];
        pooled.insert(pooled.end(), sizes.begin(), sizes.end());
      }
      for (const auto& c : op->commands) {
        if (!c.is_marker()) devices.insert(c.tag);
      }
      freqs.push_back(control_frequency(*op));
    }

    for (const auto& [key, edge] : graph.edges) {
      const double m = mean(edge.intervals);
      if (edge.intervals.size() < 2 || m == 0.0) {
        ec.unmodeled_pairs.push_back(key);
        continue;
      }
      TimeConstraint tc;
      tc.epsilon = degree_of_dependency(graph, key.first, key.second);
      tc.rd = rd_delta(edge.intervals, options.use_epsilon ? tc.epsilon : 0.0);
      tc.mean_interval = m;
      tc.samples = edge.intervals.size();
      ec.control_time[key] = tc;
    }

    for (const auto& [tag, sizes] : bursts) {
      if (sizes.size() < 2) {
        ec.unmodeled_bursts.push_back(tag);
        continue;
      }
      BurstConstraint bc;
      bc.lambda = degree_of_dominance(sizes, modal_burst(sizes));
      bc.rd = rd_mu(sizes, options.lambda_complement ? 1.0 - bc.lambda : bc.lambda);
      bc.mean_burst = mean(to_double(sizes));
      bc.samples = sizes.size();
      ec.control_burst[tag] = bc;
    }

    for (const auto& tag : devices) {
      double sum = 0.0;
      for (std::size_t k = 0; k < event_ops.size(); ++k) {
        const auto it = freqs[k].find(tag);
        const long total = static_cast<long>(event_ops[k]->commands.size());
        sum += rd_freq(it == freqs[k].end() ? 0 : it->second.count, total);
      }
      ec.control_freq[tag] = sum / static_cast<double>(event_ops.size());
    }

    model.events[event] = std::move(ec);
  }
  return model;
}

DispersionReport dispersion_across_calibrations(const std::vector<ConstraintModel>& models) {
  std::vector<std::map<std::string, double>> flat;
  for (const auto& m : models) {
    std::map<std::string, double> values;
    for (const auto& [event, ec] : m.events) {
      for (const auto& [key, tc] : ec.control_time) {
        values[event + "|time|" + key.first + "->" + key.second] = tc.rd;
      }
      for (const auto& [tag, bc] : ec.control_burst) values[event + "|burst|" + tag] = bc.rd;
      for (const auto& [tag, rd] : ec.control_freq) values[event + "|freq|" + tag] = rd;
    }
    flat.push_back(std::move(values));
  }

  DispersionReport report;
  std::set<std::string> all_keys;
  for (const auto& f : flat) {
    for (const auto& [k, v] : f) all_keys.insert(k);
  }
  for (const auto& key : all_keys) {
    std::vector<double> values;
    for (const auto& f : flat) {
      auto it = f.find(key);
      if (it != f.end()) values.push_back(it->second);
    }
    if (values.size() != flat.size()) {
      report.missing.push_back(key);
      continue;
    }
    report.entries.push_back({key, mean(values), population_sd(values), values.size()});
  }
  return report;
}

namespace {

using ojson = nlohmann::ordered_json;

}  // namespace

std::string model_to_json(const ConstraintModel& model) {
  ojson j;
  j["schema"] = kConstraintSchema;
  j["training_operations"] = model.training_operations;
  j["warnings"] = model.warnings;
  ojson events = ojson::object();
  for (const auto& [event, ec] : model.events) {
    ojson e;
    e["operations"] = ec.operations;
    e["control_time"] = ojson::array();
    for (const auto& [key, tc] : ec.control_time) {
      e["control_time"].push_back({{"src", key.first},
                                   {"dst", key.second},
                                   {"rd", tc.rd},
                                   {"mean_interval", tc.mean_interval},
                                   {"epsilon", tc.epsilon},
                                   {"samples", tc.samples}});
    }
    e["control_burst"] = ojson::array();
    for (const auto& [tag, bc] : ec.control_burst) {
      e["control_burst"].push_back({{"device", tag},
                                    {"rd", bc.rd},
                                    {"mean_burst", bc.mean_burst},
                                    {"lambda", bc.lambda},
                                    {"samples", bc.samples}});
    }
    e["control_freq"] = ojson::array();
    for (const auto& [tag, rd] : ec.control_freq) {
      e["control_freq"].push_back({{"device", tag}, {"rd", rd}});
    }
    e["unmodeled_pairs"] = ojson::array();
    for (const auto& [i, jtag] : ec.unmodeled_pairs) {
      e["unmodeled_pairs"].push_back({i, jtag});
    }
    e["unmodeled_bursts"] = ec.unmodeled_bursts;
    events[event] = std::move(e);
  }
  j["events"] = std::move(events);
  return j.dump(2);
}

ConstraintModel model_from_json(const std::string& text) {
  ConstraintModel model;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("schema", std::string()) != kConstraintSchema) {
      throw Error(ErrorCode::parse, std::string("expected schema ") + kConstraintSchema);
    }
    model.training_operations = j.at("training_operations").get<std::size_t>();
    model.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& [event, e] : j.at("events").items()) {
      EventConstraints ec;
      ec.operations = e.at("operations").get<std::size_t>();
      for (const auto& t : e.at("control_time")) {
        TimeConstraint tc;
        tc.rd = t.at("rd").get<double>();
        tc.mean_interval = t.at("mean_interval").get<double>();
        tc.epsilon = t.at("epsilon").get<double>();
        tc.samples = t.at("samples").get<std::size_t>();
        ec.control_time[{t.at("src").get<std::string>(), t.at("dst").get<std::string>()}] = tc;
      }
      for (const auto& b : e.at("control_burst")) {
        BurstConstraint bc;
        bc.rd = b.at("rd").get<double>();
        bc.mean_burst = b.at("mean_burst").get<double>();
        bc.lambda = b.at("lambda").get<double>();
        bc.samples = b.at("samples").get<std::size_t>();
        ec.control_burst[b.at("device").get<std::string>()] = bc;
      }
      for (const auto& f : e.at("control_freq")) {
        ec.control_freq[f.at("device").get<std::string>()] = f.at("rd").get<double>();
      }
      for (const auto& p : e.at("unmodeled_pairs")) {
        ec.unmodeled_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
      ec.unmodeled_bursts = e.at("unmodeled_bursts").get<std::vector<std::string>>();
      model.events[event] = std::move(ec);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse, std::string("constraint model: ") + ex.what());
  }
  return model;
}

void save_model(const std::string& path, const ConstraintModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << model_to_json(model) << '\n';
}

ConstraintModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace bridge
