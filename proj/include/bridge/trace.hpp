#pragma once

// SCADA execution traces (JSON Lines) and process time series (CSV).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridge {

// `event` records are trace markers: they open a new process-control
// operation and are never counted as commands of that operation.
enum class Op { read, write, event };

const char* to_string(Op op);
Op op_from_string(std::string_view text);

struct Command {
  std::int64_t ts = 0;  // scan-cycle index
  Op op = Op::read;
  std::string tag;
  double value = 0.0;
  std::optional<std::string> event;
  std::optional<std::string> session;

  bool is_marker() const { return op == Op::event; }
  bool operator==(const Command&) const = default;
};

struct TraceHeader {
  double scan_cycles_per_second = 1000.0;
  bool operator==(const TraceHeader&) const = default;
};

struct Trace {
  TraceHeader header;
  std::vector<Command> commands;
};

struct EventTrigger {
  std::string event;    // e.g. "Valve0.open"
  std::string trigger;  // device tag + state, e.g. "Valve.0.open"
};

struct EventSet {
  std::vector<EventTrigger> events;

  bool empty() const { return events.empty(); }
  bool contains(std::string_view event) const;
  // Throws config error when event tags are not unique.
  void validate() const;
  // One entry per distinct marker/command event, in first-seen order.
  static EventSet from_commands(const std::vector<Command>& commands);
};

inline constexpr std::string_view kPreambleEvent = "preamble";

struct ProcessControlOperation {
  std::string event;
  std::vector<Command> commands;  // markers excluded, ts order, ties in input order
};

// Trace I/O. A first line carrying "scan_cycles_per_second" and no "op" is the
// header record; everything else is a command or marker.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);
std::vector<Command> parse_trace(const std::string& path);

std::string to_jsonl(const Command& command);
void write_trace(std::ostream& out, const Trace& trace, bool with_header = true);
void write_trace_file(const std::string& path, const Trace& trace);

// Partitions commands by the most recent event marker (or by a change of the
// per-command event tag). Commands before any marker go to a "preamble"
// operation. Unknown events are kept and reported through `warnings`.
std::vector<ProcessControlOperation> segment_operations(
    const std::vector<Command>& commands, const EventSet& events,
    std::vector<std::string>* warnings = nullptr);

struct SeriesFrame {
  double ts = 0.0;  // seconds
  std::vector<double> values;
};

struct Series {
  std::vector<std::string> tags;
  std::vector<SeriesFrame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  // Index of `tag` in `tags`, or nullopt.
  std::optional<std::size_t> index_of(std::string_view tag) const;
  std::vector<double> column(std::size_t index) const;
  std::vector<double> timestamps() const;
};

Series read_series(std::istream& in);
Series parse_series(const std::string& path);
void write_series(std::ostream& out, const Series& series);
void write_series_file(const std::string& path, const Series& series);

// Shortest round-trip decimal form of a double.
std::string format_number(double value);

}  // namespace bridge
