#include "bridge/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Op op) {
  switch (op) {
    case Op::read: return "READ";
    case Op::write: return "WRITE";
    case Op::event: return "EVENT";
  }
  return "?";
}

Op op_from_string(std::string_view text) {
  if (text == "READ") return Op::read;
  if (text == "WRITE") return Op::write;
  if (text == "EVENT") return Op::event;
  throw Error(ErrorCode::parse, "unknown op '" + std::string(text) + "'");
}

bool EventSet::contains(std::string_view event) const {
  return std::any_of(events.begin(), events.end(),
                     [&](const EventTrigger& e) { return e.event == event; });
}

void EventSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : events) {
    if (!seen.insert(e.event).second) {
      throw Error(ErrorCode::config, "duplicate event tag '" + e.event + "'");
    }
  }
}

EventSet EventSet::from_commands(const std::vector<Command>& commands) {
  EventSet set;
  for (const auto& c : commands) {
    if (!c.event || set.contains(*c.event)) continue;
    std::string trigger = c.is_marker() ? c.tag : std::string();
    set.events.push_back({*c.event, trigger});
  }
  return set;
}

namespace {

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

Command command_from_json(const json& j, std::size_t line) {
  Command c;
  try {
    if (!j.contains("ts") || !j.contains("op") || !j.contains("tag")) {
      throw Error(ErrorCode::parse, "missing ts/op/tag field");
    }
    const auto& ts = j.at("ts");
    if (!ts.is_number_integer() && !ts.is_number_unsigned()) {
      throw Error(ErrorCode::parse, "ts must be an integer scan-cycle index");
    }
    c.ts = ts.get<std::int64_t>();
    if (c.ts < 0) throw Error(ErrorCode::parse, "ts must be non-negative");
    c.op = op_from_string(j.at("op").get<std::string>());
    c.tag = j.at("tag").get<std::string>();
    if (c.tag.empty()) throw Error(ErrorCode::parse, "empty tag");
    if (j.contains("value")) c.value = j.at("value").get<double>();
    if (j.contains("event") && !j.at("event").is_null()) {
      c.event = j.at("event").get<std::string>();
    }
    if (j.contains("session") && !j.at("session").is_null()) {
      c.session = j.at("session").get<std::string>();
    }
    if (c.is_marker() && !c.event) {
      throw Error(ErrorCode::parse, "EVENT record needs an event field");
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, line_error(line, e.what()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, line_error(line, e.what()));
  }
  return c;
}

}  // namespace

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string text;
  std::size_t line = 0;
  bool first_record = true;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, line_error(line, e.what()));
    }
    if (!j.is_object()) throw Error(ErrorCode::parse, line_error(line, "not a JSON object"));
    if (first_record && j.contains("scan_cycles_per_second") && !j.contains("op")) {
      trace.header.scan_cycles_per_second = j.at("scan_cycles_per_second").get<double>();
      if (!(trace.header.scan_cycles_per_second > 0.0)) {
        throw Error(ErrorCode::parse, line_error(line, "scan_cycles_per_second must be > 0"));
      }
      first_record = false;
      continue;
    }
    first_record = false;
    Command c = command_from_json(j, line);
    if (!trace.commands.empty() && c.ts < trace.commands.back().ts) {
      throw Error(ErrorCode::ordering,
                  line_error(line, "ts " + std::to_string(c.ts) + " decreases from " +
                                       std::to_string(trace.commands.back().ts)));
    }
    trace.commands.push_back(std::move(c));
  }
  return trace;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open trace '" + path + "'");
  return read_trace(in);
}

std::vector<Command> parse_trace(const std::string& path) {
  return read_trace_file(path).commands;
}

std::string to_jsonl(const Command& c) {
  ordered_json j;
  j["ts"] = c.ts;
  j["op"] = to_string(c.op);
  j["tag"] = c.tag;
  j["value"] = c.value;
  if (c.event) j["event"] = *c.event;
  if (c.session) j["session"] = *c.session;
  return j.dump();
}

void write_trace(std::ostream& out, const Trace& trace, bool with_header) {
  if (with_header) {
    ordered_json h;
    h["scan_cycles_per_second"] = trace.header.scan_cycles_per_second;
    out << h.dump() << '\n';
  }
  for (const auto& c : trace.commands) out << to_jsonl(c) << '\n';
}

void write_trace_file(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  write_trace(out, trace);
}

std::vector<ProcessControlOperation> segment_operations(
    const std::vector<Command>& commands, const EventSet& events,
    std::vector<std::string>* warnings) {
  auto warn = [&](std::string message) {
    if (warnings) warnings->push_back(std::move(message));
  };

  std::vector<ProcessControlOperation> ops;
  bool any_event = false;
  std::unordered_set<std::string> reported;

  auto open = [&](const std::string& event) {
    any_event = true;
    if (!events.empty() && !events.contains(event) && reported.insert(event).second) {
      warn("event '" + event + "' is not in the event set");
    }
    ops.push_back({event, {}});
  };

  for (const auto& c : commands) {
    if (c.is_marker()) {
      open(*c.event);
      continue;
    }
    if (c.event && (ops.empty() || ops.back().event != *c.event)) {
      open(*c.event);
    } else if (ops.empty()) {
      ops.push_back({std::string(kPreambleEvent), {}});
    }
    ops.back().commands.push_back(c);
  }

  if (!any_event && !commands.empty()) {
    warn("trace has no event markers; all commands assigned to the preamble");
  }

  // Markers immediately followed by another marker carry no commands.
  std::erase_if(ops, [](const ProcessControlOperation& op) { return op.commands.empty(); });
  for (auto& op : ops) {
    std::stable_sort(op.commands.begin(), op.commands.end(),
                     [](const Command& a, const Command& b) { return a.ts < b.ts; });
  }
  return ops;
}

std::optional<std::size_t> Series::index_of(std::string_view tag) const {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == tag) return i;
  }
  return std::nullopt;
}

std::vector<double> Series::column(std::size_t index) const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.values.at(index));
  return out;
}

std::vector<double> Series::timestamps() const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.ts);
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, std::size_t line) {
  std::string trimmed = text;
  std::erase_if(trimmed, [](char ch) { return ch == ' ' || ch == '\r' || ch == '\t'; });
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (ec != std::errc() || ptr != trimmed.data() + trimmed.size() || trimmed.empty()) {
    throw Error(ErrorCode::parse, line_error(line, "not a number: '" + text + "'"));
  }
  return value;
}

}  // namespace

Series read_series(std::istream& in) {
  Series series;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    auto fields = split_csv(text);
    if (!have_header) {
      if (fields.empty() || fields.front() != "ts") {
        throw Error(ErrorCode::parse, line_error(line, "header must start with 'ts'"));
      }
      series.tags.assign(fields.begin() + 1, fields.end());
      have_header = true;
      continue;
    }
    if (fields.size() != series.tags.size() + 1) {
      throw Error(ErrorCode::parse,
                  line_error(line, "expected " + std::to_string(series.tags.size() + 1) +
                                       " fields, got " + std::to_string(fields.size())));
    }
    SeriesFrame frame;
    frame.ts = parse_double(fields[0], line);
    if (frame.ts < 0.0) throw Error(ErrorCode::parse, line_error(line, "negative ts"));
    if (!series.frames.empty() && frame.ts <= series.frames.back().ts) {
      throw Error(ErrorCode::ordering, line_error(line, "ts must be strictly increasing"));
    }
    frame.values.reserve(series.tags.size());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      frame.values.push_back(parse_double(fields[i], line));
    }
    series.frames.push_back(std::move(frame));
  }
  if (!have_header) throw Error(ErrorCode::parse, "series has no header");
  return series;
}

Series parse_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open series '" + path + "'");
  return read_series(in);
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_series(std::ostream& out, const Series& series) {
  out << "ts";
  for (const auto& t : series.tags) out << ',' << t;
  out << '\n';
  for (const auto& f : series.frames) {
    out << format_number(f.ts);
    for (double v : f.values) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_series_file(const std::string& path, const Series& series) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  write_series(out, series);
}

}  // namespace bridge
