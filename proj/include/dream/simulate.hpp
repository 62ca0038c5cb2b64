#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dream/event_log.hpp"
#include "dream/petri_net.hpp"

namespace dream {

struct DelaySpec {
  enum class Kind { Fixed, Uniform, Exponential };
  Kind kind = Kind::Fixed;
  double a = 0.0;  // Fixed: value; Uniform: low; Exponential: mean
  double b = 0.0;  // Uniform: high

  static DelaySpec fixed(double v) { return {Kind::Fixed, v, 0.0}; }
  static DelaySpec uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static DelaySpec exponential(double mean) { return {Kind::Exponential, mean, 0.0}; }
};

/// Time-dependent branch rule at a decision point. When the transitions in
/// `choices` compete, a delay is drawn from `delay` and the elapsed time
/// since `since_event` (or since the previous event when unset) selects the
/// bin: elapsed < thresholds[0] -> choices[0], ... >= last -> choices.back().
/// `bin_margin` > 0 keeps sampled delays away from bin boundaries.
struct BranchRule {
  std::vector<std::string> choices;  // transition labels, size = bins
  std::vector<double> thresholds;    // ascending, size = bins - 1
  std::optional<std::string> since_event;
  DelaySpec delay = DelaySpec::uniform(0.0, 1.0);
  double bin_margin = 0.0;
};

/// A Petri net annotated with per-transition delay distributions and
/// optional time-dependent branch rules, used to sample synthetic logs.
struct TimedNet {
  PetriNet net;
  std::map<std::string, DelaySpec> delays;  // by transition label
  std::vector<BranchRule> rules;
  double default_delay = 1.0;
  std::size_t max_steps = 10000;
};

/// Samples `n_traces` traces by walking the net from its initial marking.
/// Hidden transitions fire silently; every generated trace replays on the
/// net with fitness 1.0.
EventLog simulate_log(const TimedNet& spec, std::size_t n_traces,
                      std::uint64_t seed);

/// Loads a TimedNet from JSON: {"pnml": inline PNML string or
/// "pnml_path": path, "delays": {...}, "rules": [...]}.
TimedNet load_timed_net(std::istream& source,
                        const std::string& base_dir = ".");

}  // namespace dream
