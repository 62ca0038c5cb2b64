#include "dream/replay.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>

namespace dream {

ReplayContext::ReplayContext(const PetriNet& net, const ReplayPolicy& policy,
                             std::size_t trace_index)
    : net_(net), policy_(policy), trace_index_(trace_index) {
  marking_ = net.initial_marking;
  if (marking_.tokens.size() != net.places.size())
    marking_ = net.default_initial_marking();
  // The environment produces the initial marking.
  stats_.produced += marking_.total();
}

std::vector<std::size_t> ReplayContext::find_enabling_hidden_sequence(
    std::size_t target) const {
  // Shortest sequence of hidden firings that enables `target`, BFS over
  // markings with visited-set memoization.
  struct Node {
    Marking m;
    std::vector<std::size_t> path;
  };
  std::deque<Node> queue{{marking_, {}}};
  std::set<std::vector<int>> visited{marking_.tokens};
  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (net_.enabled(node.m, target)) return node.path;
    if (node.path.size() >= policy_.hidden_search_depth) continue;
    for (std::size_t t = 0; t < net_.transitions.size(); ++t) {
      if (!net_.transitions[t].hidden() || !net_.enabled(node.m, t)) continue;
      Marking next = node.m;
      net_.fire(next, t);
      if (!visited.insert(next.tokens).second) continue;
      auto path = node.path;
      path.push_back(t);
      queue.push_back({std::move(next), std::move(path)});
    }
  }
  return {};  // no enabling sequence within the depth limit
}

void ReplayContext::fire_one(std::size_t t, double time,
                             std::size_t instance_index, FiringKind kind,
                             StepResult& out) {
  for (std::size_t p : net_.pre[t]) {
    if (marking_.tokens[p] > 0) {
      out.exits.push_back({p, time, instance_index});
    }
  }
  const int shortfall = net_.fire(marking_, t, /*force=*/true);
  stats_.missing += shortfall;
  stats_.consumed += static_cast<long long>(net_.pre[t].size());
  stats_.produced += static_cast<long long>(net_.post[t].size());
  for (std::size_t p : net_.post[t]) {
    out.entries.push_back({p, time, trace_index_, instance_index});
  }
  firings_.push_back({firings_.size(), t,
                      shortfall > 0 ? FiringKind::Forced : kind, marking_});
}

ReplayContext::StepResult ReplayContext::step(const EventInstance& instance,
                                              std::size_t instance_index) {
  StepResult result;
  const auto target = net_.transition_by_label(instance.event_name);
  if (!target) {
    if (policy_.unknown_events == UnknownEventPolicy::Error) {
      throw ValidationError("event '" + instance.event_name +
                            "' has no transition in the model (trace " +
                            std::to_string(trace_index_) + ")");
    }
    ++stats_.skipped_events;
    result.skipped = true;
    return result;
  }
  if (!net_.enabled(marking_, *target)) {
    for (std::size_t h : find_enabling_hidden_sequence(*target)) {
      fire_one(h, instance.timestamp, instance_index, FiringKind::Hidden, result);
    }
  }
  fire_one(*target, instance.timestamp, instance_index,
           FiringKind::Observable, result);
  return result;
}

void ReplayContext::finish() {
  if (finished_) return;
  finished_ = true;
  // The environment consumes the final marking: one token from the sink.
  if (net_.sink_place) {
    if (marking_.tokens[*net_.sink_place] > 0) {
      --marking_.tokens[*net_.sink_place];
    } else {
      ++stats_.missing;
    }
    ++stats_.consumed;
  }
  stats_.remaining += marking_.total();
}

TraceReplayResult replay_trace(const PetriNet& net, const Trace& trace,
                               const ReplayPolicy& policy,
                               std::size_t trace_index) {
  ReplayContext ctx(net, policy, trace_index);
  TraceReplayResult result;
  for (std::size_t j = 0; j < trace.instances.size(); ++j) {
    auto step = ctx.step(trace.instances[j], j);
    result.entries.insert(result.entries.end(), step.entries.begin(),
                          step.entries.end());
    result.exits.insert(result.exits.end(), step.exits.begin(),
                        step.exits.end());
    result.markings.push_back(ctx.marking());
  }
  ctx.finish();
  result.stats = ctx.stats();
  result.firings = ctx.firings();
  return result;
}

ReplayStats replay_log(const PetriNet& net, const EventLog& log,
                       const ReplayPolicy& policy) {
  ReplayStats total;
  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    total += replay_trace(net, log.traces[i], policy, i).stats;
  }
  return total;
}

double fitness(const ReplayStats& stats) {
  if (stats.consumed <= 0 || stats.produced <= 0) {
    throw ValidationError("fitness undefined: empty replay");
  }
  const double value =
      (1.0 - static_cast<double>(stats.missing) / stats.consumed) / 2.0 +
      (1.0 - static_cast<double>(stats.remaining) / stats.produced) / 2.0;
  return std::clamp(value, 0.0, 1.0);
}

ModelSelection select_model(const std::vector<PetriNet>& candidates,
                            const EventLog& train_log,
                            const ReplayPolicy& policy) {
  if (candidates.empty())
    throw ValidationError("select_model: no candidates given");
  ModelSelection sel;
  for (const auto& net : candidates) {
    sel.fitness_scores.push_back(fitness(replay_log(net, train_log, policy)));
  }
  sel.best_index = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double best = sel.fitness_scores[sel.best_index];
    const double cur = sel.fitness_scores[i];
    if (cur > best ||
        (cur == best &&
         candidates[i].node_count() < candidates[sel.best_index].node_count())) {
      sel.best_index = i;
    }
  }
  return sel;
}

void export_replay_csv(const PetriNet& net, const EventLog& log,
                       const ReplayPolicy& policy, std::ostream& sink) {
  sink << "trace_id,step,fired_transition,kind,marking_after\n";
  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    const auto result = replay_trace(net, log.traces[i], policy, i);
    for (const auto& f : result.firings) {
      sink << log.traces[i].case_id << "," << f.step << ","
           << net.transitions[f.transition].id << ",";
      switch (f.kind) {
        case FiringKind::Observable: sink << "observable"; break;
        case FiringKind::Hidden: sink << "hidden"; break;
        case FiringKind::Forced: sink << "forced"; break;
      }
      sink << ",\"";
      for (std::size_t p = 0; p < f.marking_after.tokens.size(); ++p) {
        if (p) sink << " ";
        sink << f.marking_after.tokens[p];
      }
      sink << "\"\n";
    }
  }
}

}  // namespace dream
