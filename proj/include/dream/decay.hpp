#pragma once

#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dream/event_log.hpp"
#include "dream/petri_net.hpp"
#include "dream/replay.hpp"

namespace dream {

/// A Petri net whose places carry linear decay functions
/// f_p(tau) = beta - alpha_p * (tau - tau_p), clamped at 0.
struct DecayModel {
  PetriNet net;
  double beta = 1.0;
  std::vector<double> alpha;  // one rate per place, all > 0
  std::string trained_on;     // provenance: log id / fold id
};

struct DecayState {
  std::vector<double> last_entry;        // tau_p; NaN encodes delta = inf
  std::vector<long long> token_counts;   // C
  std::vector<long long> attribute_counts;  // R, aligned with vocabulary
  Marking marking;

  static DecayState reset(const PetriNet& net, std::size_t vocab_size);
};

struct TimedStateSample {
  std::vector<double> features;  // F + C + M + R
  std::string label;             // next event
  std::string trace_id;
  std::size_t instance_index = 0;
  double tau = 0.0;
};

struct SampleSet {
  std::vector<TimedStateSample> samples;
  std::vector<std::string> label_alphabet;
  std::vector<std::string> vocabulary;
  std::size_t place_count = 0;

  std::size_t feature_width() const { return 3 * place_count + vocabulary.size(); }
};

/// Estimates per-place decay rates from a training log.
/// Places entered at most once per trace get alpha = beta / max trace
/// duration; the rest get alpha = beta / mean reactivation gap.
DecayModel estimate_alphas(const PetriNet& net, const EventLog& log,
                           double beta = 1.0, const ReplayPolicy& policy = {});

/// Decay response vector F(now). A place entered at exactly `now` responds
/// with beta; an unset place responds 0.
std::vector<double> decay_response(const DecayModel& model,
                                   const DecayState& state, double now);

struct SampleOptions {
  ReplayPolicy policy;
  /// Emit a sample for the initial marking before the first instance
  /// (label = first event). Off by default.
  bool emit_initial_sample = false;
};

/// Replays `log` on the decay-enhanced net and emits one timed state sample
/// per non-final instance, labeled with the next instance's event.
SampleSet build_samples(const DecayModel& model, const EventLog& log,
                        const std::vector<std::string>& vocabulary,
                        const SampleOptions& options = {});

/// CSV with header trace_id,instance_idx,tau,F...,C...,M...,R...,label plus
/// a JSON sidecar (beta, alpha, vocabulary, label alphabet).
void serialize_samples(const SampleSet& set, std::ostream& csv_sink,
                       std::ostream& sidecar_sink, const DecayModel& model);
SampleSet deserialize_samples(std::istream& csv_source,
                              std::istream& sidecar_source);

void save_decay_model(const DecayModel& model, std::ostream& sink);
DecayModel load_decay_model(std::istream& source);

}  // namespace dream
