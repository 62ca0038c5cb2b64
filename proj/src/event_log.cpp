#include "dream/event_log.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace dream {

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
long long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yy = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yy + (m <= 2);
}

}  // namespace

double parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  int consumed = 0;
  // Date and time, 'T' or ' ' separated.
  if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%lf%n", &y, &mo, &d, &sep,
                  &h, &mi, &sec, &consumed) < 7 ||
      (sep != 'T' && sep != 't' && sep != ' ')) {
    throw ValidationError("unparseable timestamp: '" + text + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 ||
      sec >= 61.0) {
    throw ValidationError("timestamp out of range: '" + text + "'");
  }
  double offset = 0.0;  // seconds east of UTC
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    if (rest == "Z" || rest == "z") {
      // UTC
    } else if (rest[0] == '+' || rest[0] == '-') {
      int oh = 0, om = 0;
      if (std::sscanf(rest.c_str() + 1, "%d:%d", &oh, &om) < 1) {
        throw ValidationError("bad timezone offset in '" + text + "'");
      }
      if (rest.find(':') == std::string::npos && rest.size() == 5) {
        // +0100 form
        oh = std::stoi(rest.substr(1, 2));
        om = std::stoi(rest.substr(3, 2));
      }
      offset = (oh * 3600 + om * 60) * (rest[0] == '+' ? 1.0 : -1.0);
    } else {
      throw ValidationError("trailing junk in timestamp '" + text + "'");
    }
  }
  const double days = static_cast<double>(days_from_civil(y, mo, d));
  return days * 86400.0 + h * 3600.0 + mi * 60.0 + sec - offset;
}

std::string format_timestamp(double epoch_seconds) {
  const double ms = std::round(epoch_seconds * 1000.0) / 1000.0;
  long long day = static_cast<long long>(std::floor(ms / 86400.0));
  double rem = ms - day * 86400.0;
  int y;
  unsigned mo, d;
  civil_from_days(day, y, mo, d);
  const int h = static_cast<int>(rem / 3600.0);
  rem -= h * 3600.0;
  const int mi = static_cast<int>(rem / 60.0);
  rem -= mi * 60.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%06.3fZ", y, mo, d,
                h, mi, rem);
  return buf;
}

std::size_t EventLog::total_instances() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.instances.size();
  return n;
}

void finalize_log(EventLog& log) {
  std::vector<Trace> kept;
  kept.reserve(log.traces.size());
  for (auto& trace : log.traces) {
    if (trace.instances.empty()) {
      ++log.dropped_empty_traces;
      continue;
    }
    const bool sorted = std::is_sorted(
        trace.instances.begin(), trace.instances.end(),
        [](const EventInstance& a, const EventInstance& b) {
          return a.timestamp < b.timestamp;
        });
    if (!sorted) {
      std::stable_sort(trace.instances.begin(), trace.instances.end(),
                       [](const EventInstance& a, const EventInstance& b) {
                         return a.timestamp < b.timestamp;
                       });
      ++log.reordered_traces;
    }
    kept.push_back(std::move(trace));
  }
  log.traces = std::move(kept);
  log.alphabet.clear();
  for (const auto& trace : log.traces)
    for (const auto& inst : trace.instances) log.alphabet.insert(inst.event_name);
}

namespace {

namespace pt = boost::property_tree;

void collect_xes_attributes(const pt::ptree& node,
                            std::map<std::string, std::string>& out) {
  for (const auto& [tag, child] : node) {
    if (tag != "string" && tag != "date" && tag != "int" && tag != "float" &&
        tag != "boolean" && tag != "id") {
      continue;
    }
    const auto key = child.get_optional<std::string>("<xmlattr>.key");
    const auto value = child.get_optional<std::string>("<xmlattr>.value");
    if (key && value) out[*key] = *value;
  }
}

}  // namespace

EventLog parse_xes(std::istream& source) {
  pt::ptree doc;
  try {
    pt::read_xml(source, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML at line " + std::to_string(e.line()) +
                     ": " + e.message());
  }
  const auto log_node = doc.get_child_optional("log");
  if (!log_node) throw ParseError("not an XES document: missing <log> root");

  EventLog log;
  std::size_t trace_no = 0;
  for (const auto& [tag, trace_node] : *log_node) {
    if (tag != "trace") continue;
    ++trace_no;
    Trace trace;
    std::map<std::string, std::string> trace_attrs;
    collect_xes_attributes(trace_node, trace_attrs);
    trace.case_id = trace_attrs.count("concept:name")
                        ? trace_attrs["concept:name"]
                        : "trace-" + std::to_string(trace_no);
    for (const auto& [etag, event_node] : trace_node) {
      if (etag != "event") continue;
      std::map<std::string, std::string> attrs;
      collect_xes_attributes(event_node, attrs);
      const auto name_it = attrs.find("concept:name");
      const auto ts_it = attrs.find("time:timestamp");
      if (name_it == attrs.end() || ts_it == attrs.end()) {
        throw ValidationError("event in trace '" + trace.case_id +
                              "' missing concept:name or time:timestamp");
      }
      EventInstance inst;
      inst.event_name = name_it->second;
      inst.timestamp = parse_timestamp(ts_it->second);
      attrs.erase("concept:name");
      attrs.erase("time:timestamp");
      inst.attributes = std::move(attrs);
      trace.instances.push_back(std::move(inst));
    }
    log.traces.push_back(std::move(trace));
  }
  finalize_log(log);
  return log;
}

EventLog parse_xes_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open XES file: " + path);
  return parse_xes(in);
}

namespace {

// RFC-4180: quoted fields may contain commas, newlines, and doubled quotes.
std::optional<std::vector<std::string>> read_csv_record(std::istream& in) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return fields;
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(static_cast<char>(c));
    }
  }
  if (!any) return std::nullopt;
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

EventLog parse_csv(std::istream& source, const CsvMapping& mapping) {
  auto header = read_csv_record(source);
  if (!header) throw ParseError("empty CSV: no header row");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end())
      throw ParseError("mapped column '" + name + "' not in CSV header");
    return it->second;
  };
  const std::size_t case_col = require(mapping.case_column);
  const std::size_t event_col = require(mapping.event_column);
  const std::size_t ts_col = require(mapping.timestamp_column);
  std::vector<std::pair<std::string, std::size_t>> attr_cols;
  for (const auto& [name, kind] : mapping.attribute_columns) {
    attr_cols.emplace_back(name, require(name));
    (void)kind;
  }

  EventLog log;
  std::map<std::string, std::size_t> trace_index;  // case id -> position
  std::size_t row = 1;
  while (auto rec = read_csv_record(source)) {
    ++row;
    if (rec->size() == 1 && (*rec)[0].empty()) continue;  // blank line
    if (rec->size() < header->size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header->size()) + " fields, got " +
                       std::to_string(rec->size()));
    }
    EventInstance inst;
    inst.event_name = (*rec)[event_col];
    try {
      inst.timestamp = parse_timestamp((*rec)[ts_col]);
    } catch (const ValidationError& e) {
      throw ParseError("row " + std::to_string(row) + ": " + e.what());
    }
    if (inst.event_name.empty()) {
      throw ValidationError("row " + std::to_string(row) + ": empty event name");
    }
    for (const auto& [name, idx] : attr_cols) {
      if (!(*rec)[idx].empty()) inst.attributes[name] = (*rec)[idx];
    }
    const std::string& case_id = (*rec)[case_col];
    auto it = trace_index.find(case_id);
    if (it == trace_index.end()) {
      trace_index[case_id] = log.traces.size();
      log.traces.push_back(Trace{case_id, {}});
      it = trace_index.find(case_id);
    }
    log.traces[it->second].instances.push_back(std::move(inst));
  }
  log.attribute_schema = mapping.attribute_columns;
  finalize_log(log);
  return log;
}

EventLog parse_csv_file(const std::string& path, const CsvMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file: " + path);
  return parse_csv(in, mapping);
}

void serialize_csv(const EventLog& log, std::ostream& sink) {
  std::vector<std::string> attr_names;
  for (const auto& [name, kind] : log.attribute_schema) attr_names.push_back(name);
  sink << "case,event,timestamp";
  for (const auto& a : attr_names) sink << "," << csv_escape(a);
  sink << "\n";
  for (const auto& trace : log.traces) {
    for (const auto& inst : trace.instances) {
      sink << csv_escape(trace.case_id) << "," << csv_escape(inst.event_name)
           << "," << format_timestamp(inst.timestamp);
      for (const auto& a : attr_names) {
        auto it = inst.attributes.find(a);
        sink << "," << (it == inst.attributes.end() ? "" : csv_escape(it->second));
      }
      sink << "\n";
    }
  }
}

EventLog filter_by_attribute(const EventLog& log, const std::string& key,
                             const std::string& value) {
  EventLog out;
  out.attribute_schema = log.attribute_schema;
  for (const auto& trace : log.traces) {
    Trace filtered{trace.case_id, {}};
    for (const auto& inst : trace.instances) {
      auto it = inst.attributes.find(key);
      if (it != inst.attributes.end() && it->second == value)
        filtered.instances.push_back(inst);
    }
    out.traces.push_back(std::move(filtered));
  }
  finalize_log(out);
  return out;
}

std::vector<Fold> split_folds(const EventLog& log, std::size_t k,
                              std::uint64_t seed) {
  if (k < 2) throw ValidationError("split_folds: k must be >= 2");
  if (k > log.size())
    throw ValidationError("split_folds: k exceeds the number of traces");

  std::vector<std::size_t> order(log.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    Fold& fold = folds[f];
    fold.train.attribute_schema = log.attribute_schema;
    fold.test.attribute_schema = log.attribute_schema;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Trace& trace = log.traces[order[i]];
      if (i % k == f) fold.test.traces.push_back(trace);
      else fold.train.traces.push_back(trace);
    }
    finalize_log(fold.train);
    finalize_log(fold.test);
  }
  return folds;
}

}  // namespace dream
