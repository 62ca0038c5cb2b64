#include "dream/simulate.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

namespace dream {

namespace {

double sample_delay(const DelaySpec& spec, std::mt19937_64& rng) {
  switch (spec.kind) {
    case DelaySpec::Kind::Fixed:
      return spec.a;
    case DelaySpec::Kind::Uniform:
      return std::uniform_real_distribution<double>(spec.a, spec.b)(rng);
    case DelaySpec::Kind::Exponential:
      return std::exponential_distribution<double>(1.0 / spec.a)(rng);
  }
  return spec.a;
}

// Delay sample for a branch rule. With bin_margin > 0 (uniform delay only),
// a bin is picked uniformly and the delay drawn from the bin interior, so
// the realized delays stay clear of the decision thresholds.
double sample_rule_delay(const BranchRule& rule, std::mt19937_64& rng) {
  if (rule.bin_margin > 0.0 && rule.delay.kind == DelaySpec::Kind::Uniform &&
      !rule.thresholds.empty()) {
    std::vector<double> edges{rule.delay.a};
    for (double t : rule.thresholds) edges.push_back(t);
    edges.push_back(rule.delay.b);
    const auto bin = std::uniform_int_distribution<std::size_t>(
        0, edges.size() - 2)(rng);
    const double lo = edges[bin] + rule.bin_margin;
    const double hi = edges[bin + 1] - rule.bin_margin;
    return std::uniform_real_distribution<double>(lo, std::max(lo, hi))(rng);
  }
  return sample_delay(rule.delay, rng);
}

std::size_t rule_choice(const BranchRule& rule, double elapsed) {
  std::size_t bin = 0;
  while (bin < rule.thresholds.size() && elapsed >= rule.thresholds[bin]) ++bin;
  return bin;
}

}  // namespace

EventLog simulate_log(const TimedNet& spec, std::size_t n_traces,
                      std::uint64_t seed) {
  const PetriNet& net = spec.net;
  std::mt19937_64 rng(seed);
  EventLog log;

  for (std::size_t i = 0; i < n_traces; ++i) {
    Trace trace;
    trace.case_id = "case-" + std::to_string(i + 1);
    Marking marking = net.initial_marking;
    if (marking.tokens.size() != net.places.size())
      marking = net.default_initial_marking();
    double now = static_cast<double>(i) * 86400.0;  // one case per day
    double prev_event_time = now;
    std::map<std::string, double> last_seen;  // event name -> timestamp

    for (std::size_t step = 0; step < spec.max_steps; ++step) {
      if (net.sink_place && marking.tokens[*net.sink_place] > 0) break;

      std::vector<std::size_t> observable, hidden;
      for (std::size_t t = 0; t < net.transitions.size(); ++t) {
        if (!net.enabled(marking, t)) continue;
        (net.transitions[t].hidden() ? hidden : observable).push_back(t);
      }
      if (observable.empty()) {
        if (!hidden.empty()) {
          const auto pick = std::uniform_int_distribution<std::size_t>(
              0, hidden.size() - 1)(rng);
          net.fire(marking, hidden[pick]);
          continue;
        }
        throw ValidationError("simulate_log: dead net, no enabled transition "
                              "before reaching the sink (trace " +
                              trace.case_id + ")");
      }

      // A branch rule applies when every one of its choices is enabled.
      const BranchRule* rule = nullptr;
      for (const auto& r : spec.rules) {
        bool all = true;
        for (const auto& label : r.choices) {
          const auto t = net.transition_by_label(label);
          if (!t || !net.enabled(marking, *t)) {
            all = false;
            break;
          }
        }
        if (all && r.choices.size() > 1) {
          rule = &r;
          break;
        }
      }

      std::size_t chosen;
      double delay;
      if (rule) {
        delay = sample_rule_delay(*rule, rng);
        double ref = prev_event_time;
        if (rule->since_event) {
          auto it = last_seen.find(*rule->since_event);
          if (it != last_seen.end()) ref = it->second;
        }
        const double elapsed = now + delay - ref;
        chosen = *net.transition_by_label(rule->choices[rule_choice(*rule, elapsed)]);
      } else {
        const auto pick = std::uniform_int_distribution<std::size_t>(
            0, observable.size() - 1)(rng);
        chosen = observable[pick];
        auto it = spec.delays.find(net.transitions[chosen].label);
        delay = it != spec.delays.end() ? sample_delay(it->second, rng)
                                        : spec.default_delay;
      }

      now += delay;
      net.fire(marking, chosen);
      trace.instances.push_back({net.transitions[chosen].label, now, {}});
      last_seen[net.transitions[chosen].label] = now;
      prev_event_time = now;
    }
    log.traces.push_back(std::move(trace));
  }
  finalize_log(log);
  return log;
}

TimedNet load_timed_net(std::istream& source, const std::string& base_dir) {
  nlohmann::json j;
  source >> j;
  TimedNet spec;
  if (j.contains("pnml_path")) {
    spec.net = parse_pnml_file(base_dir + "/" +
                               j.at("pnml_path").get<std::string>());
  } else if (j.contains("pnml")) {
    std::istringstream in(j.at("pnml").get<std::string>());
    spec.net = parse_pnml(in);
  } else {
    throw ParseError("timed net JSON needs 'pnml' or 'pnml_path'");
  }
  auto parse_delay = [](const nlohmann::json& d) {
    const std::string kind = d.at("kind");
    if (kind == "fixed") return DelaySpec::fixed(d.at("value").get<double>());
    if (kind == "uniform")
      return DelaySpec::uniform(d.at("low").get<double>(),
                                d.at("high").get<double>());
    if (kind == "exponential")
      return DelaySpec::exponential(d.at("mean").get<double>());
    throw ParseError("unknown delay kind '" + kind + "'");
  };
  // Note: bind containers before iterating; json::value() returns a
  // temporary and items() would dangle.
  const nlohmann::json delays =
      j.contains("delays") ? j.at("delays") : nlohmann::json::object();
  for (const auto& [label, d] : delays.items()) spec.delays[label] = parse_delay(d);
  spec.default_delay = j.value("default_delay", 1.0);
  const nlohmann::json rules =
      j.contains("rules") ? j.at("rules") : nlohmann::json::array();
  for (const auto& r : rules) {
    BranchRule rule;
    rule.choices = r.at("choices").get<std::vector<std::string>>();
    rule.thresholds = r.at("thresholds").get<std::vector<double>>();
    if (r.contains("since_event"))
      rule.since_event = r.at("since_event").get<std::string>();
    if (r.contains("delay")) rule.delay = parse_delay(r.at("delay"));
    rule.bin_margin = r.value("bin_margin", 0.0);
    spec.rules.push_back(std::move(rule));
  }
  return spec;
}

}  // namespace dream
