#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "dream/event_log.hpp"
#include "dream/petri_net.hpp"

namespace dream {

struct ReplayStats {
  long long missing = 0;
  long long consumed = 0;
  long long remaining = 0;
  long long produced = 0;
  long long skipped_events = 0;

  ReplayStats& operator+=(const ReplayStats& o) {
    missing += o.missing;
    consumed += o.consumed;
    remaining += o.remaining;
    produced += o.produced;
    skipped_events += o.skipped_events;
    return *this;
  }
};

struct TokenEntry {
  std::size_t place_index = 0;
  double time = 0.0;
  std::size_t trace_index = 0;
  std::size_t instance_index = 0;
};

/// A token leaving a place, stamped with the consuming firing's timestamp.
/// Needed for reactivation-gap statistics.
struct TokenExit {
  std::size_t place_index = 0;
  double time = 0.0;
  std::size_t instance_index = 0;
};

enum class UnknownEventPolicy { Skip, Error };

struct ReplayPolicy {
  std::size_t hidden_search_depth = 10;
  UnknownEventPolicy unknown_events = UnknownEventPolicy::Skip;
};

enum class FiringKind { Observable, Hidden, Forced };

struct FiringRecord {
  std::size_t step = 0;
  std::size_t transition = 0;
  FiringKind kind = FiringKind::Observable;
  Marking marking_after;
};

/// Incremental replay of one trace. decay_sampler drives this step by step
/// so that decay state updates see exactly the replay engine's token moves.
class ReplayContext {
 public:
  ReplayContext(const PetriNet& net, const ReplayPolicy& policy,
                std::size_t trace_index = 0);

  struct StepResult {
    bool skipped = false;  // event not in the model alphabet
    std::vector<TokenEntry> entries;
    std::vector<TokenExit> exits;
  };

  /// Replays one event instance: resolves hidden transitions by shortest
  /// firing sequence (BFS over markings), force-fires when still blocked.
  StepResult step(const EventInstance& instance, std::size_t instance_index);

  /// Applies the final-marking consumption convention and computes
  /// `remaining`. Call once, after the last step.
  void finish();

  const Marking& marking() const { return marking_; }
  const ReplayStats& stats() const { return stats_; }
  const std::vector<FiringRecord>& firings() const { return firings_; }

 private:
  std::vector<std::size_t> find_enabling_hidden_sequence(std::size_t target) const;
  void fire_one(std::size_t t, double time, std::size_t instance_index,
                FiringKind kind, StepResult& out);

  const PetriNet& net_;
  ReplayPolicy policy_;
  std::size_t trace_index_;
  Marking marking_;
  ReplayStats stats_;
  std::vector<FiringRecord> firings_;
  bool finished_ = false;
};

struct TraceReplayResult {
  std::vector<TokenEntry> entries;
  std::vector<TokenExit> exits;
  std::vector<Marking> markings;  // post-fire marking per instance
  ReplayStats stats;
  std::vector<FiringRecord> firings;
};

TraceReplayResult replay_trace(const PetriNet& net, const Trace& trace,
                               const ReplayPolicy& policy = {},
                               std::size_t trace_index = 0);

ReplayStats replay_log(const PetriNet& net, const EventLog& log,
                       const ReplayPolicy& policy = {});

/// Token-based replay fitness:
/// (1 - missing/consumed)/2 + (1 - remaining/produced)/2, clamped to [0,1].
double fitness(const ReplayStats& stats);

struct ModelSelection {
  std::size_t best_index = 0;
  std::vector<double> fitness_scores;
};

/// Replays `train_log` on every candidate and picks the argmax-fitness net.
/// Ties break by fewer nodes, then input order.
ModelSelection select_model(const std::vector<PetriNet>& candidates,
                            const EventLog& train_log,
                            const ReplayPolicy& policy = {});

/// Debug trace: trace_id,step,fired_transition,kind,marking_after
void export_replay_csv(const PetriNet& net, const EventLog& log,
                       const ReplayPolicy& policy, std::ostream& sink);

}  // namespace dream
