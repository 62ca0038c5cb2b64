#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dream {

/// Thrown on malformed input files or bad configuration.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when structurally valid input violates a semantic requirement.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses an absolute timestamp to real-valued seconds since the Unix epoch
/// (UTC). Accepts ISO-8601 (`2012-03-01T10:15:30.250+01:00`, `...Z`) and
/// `YYYY-MM-DD HH:MM:SS(.fff)` (assumed UTC). Millisecond precision.
double parse_timestamp(const std::string& text);

/// Formats epoch seconds as ISO-8601 UTC with millisecond precision.
std::string format_timestamp(double epoch_seconds);

struct EventInstance {
  std::string event_name;
  double timestamp = 0.0;  // epoch seconds, UTC
  std::map<std::string, std::string> attributes;
};

struct Trace {
  std::string case_id;
  std::vector<EventInstance> instances;  // sorted non-decreasing by timestamp

  std::size_t length() const { return instances.size(); }
  double duration() const {
    return instances.back().timestamp - instances.front().timestamp;
  }
};

enum class AttributeKind { Categorical, Continuous };

struct EventLog {
  std::vector<Trace> traces;
  std::set<std::string> alphabet;
  std::map<std::string, AttributeKind> attribute_schema;
  std::size_t dropped_empty_traces = 0;
  std::size_t reordered_traces = 0;  // traces re-sorted at parse time

  std::size_t size() const { return traces.size(); }
  std::size_t total_instances() const;
  const EventInstance& at(std::size_t trace_idx, std::size_t inst_idx) const {
    return traces.at(trace_idx).instances.at(inst_idx);
  }
};

/// Rebuilds alphabet from instances, sorts each trace stably by timestamp,
/// and drops empty traces. Called by every parser before returning.
void finalize_log(EventLog& log);

/// Parses the XES core subset: log > trace > event, with string/date/int/
/// float attribute elements. `concept:name` and `time:timestamp` are
/// mandatory per event; all other attributes land in the attribute map.
EventLog parse_xes(std::istream& source);
EventLog parse_xes_file(const std::string& path);

struct CsvMapping {
  std::string case_column;
  std::string event_column;
  std::string timestamp_column;
  std::map<std::string, AttributeKind> attribute_columns;
};

/// Parses a CSV event log (RFC-4180 quoting, header row required). Rows are
/// grouped by case id; ties on timestamp keep file order.
EventLog parse_csv(std::istream& source, const CsvMapping& mapping);
EventLog parse_csv_file(const std::string& path, const CsvMapping& mapping);

/// Writes the log back out as CSV (case,event,timestamp,attributes...).
void serialize_csv(const EventLog& log, std::ostream& sink);

/// Keeps only instances whose attribute `key` equals `value`; traces left
/// empty afterwards are dropped.
EventLog filter_by_attribute(const EventLog& log, const std::string& key,
                             const std::string& value);

struct Fold {
  EventLog train;
  EventLog test;
};

/// Deterministic k-fold split by trace. Traces are shuffled with `seed` and
/// partitioned into k near-equal disjoint test folds.
std::vector<Fold> split_folds(const EventLog& log, std::size_t k,
                              std::uint64_t seed);

}  // namespace dream
