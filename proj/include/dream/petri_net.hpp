#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dream {

/// Transition labels: observable event name or hidden (tau).
struct Transition {
  std::string id;
  std::string label;  // empty <=> hidden
  bool hidden() const { return label.empty(); }
};

/// Token counts per place, index-aligned with PetriNet::places.
struct Marking {
  std::vector<int> tokens;

  int total() const;
  bool operator==(const Marking&) const = default;
};

struct PetriNet {
  std::vector<std::string> places;
  std::vector<Transition> transitions;
  // arcs[t] holds the pre/post place indices of transition t
  std::vector<std::vector<std::size_t>> pre;   // •t
  std::vector<std::vector<std::size_t>> post;  // t•
  std::optional<std::size_t> source_place;
  std::optional<std::size_t> sink_place;
  Marking initial_marking;

  std::size_t place_count() const { return places.size(); }
  std::size_t transition_count() const { return transitions.size(); }
  std::size_t node_count() const { return places.size() + transitions.size(); }

  std::optional<std::size_t> place_index(const std::string& id) const;
  std::optional<std::size_t> transition_index(const std::string& id) const;
  /// Index of the unique transition carrying an observable label.
  std::optional<std::size_t> transition_by_label(const std::string& label) const;

  bool enabled(const Marking& m, std::size_t t) const;

  /// Fires transition t. Without `force`, throws if not enabled. With
  /// `force`, input places at zero stay at zero; the returned count is the
  /// token shortfall (0 when enabled).
  int fire(Marking& m, std::size_t t, bool force = false) const;

  /// Marking with one token in the source place (used when PNML declares no
  /// explicit initial marking).
  Marking default_initial_marking() const;
};

struct StructuralReport {
  std::vector<std::size_t> source_candidates;  // places with no incoming arcs
  std::vector<std::size_t> sink_candidates;    // places with no outgoing arcs
  bool unique_source = false;
  bool unique_sink = false;
  std::vector<std::string> off_path_nodes;  // not on any source->sink path
  bool ok() const {
    return unique_source && unique_sink && off_path_nodes.empty();
  }
};

/// Advisory structural sanity checks; never blocks replay.
StructuralReport structural_check(const PetriNet& net);

/// PNML core subset. Hidden transitions are recognized by an empty name, a
/// name starting with "tau" or "Inv_", or a toolspecific invisible flag.
PetriNet parse_pnml(std::istream& source);
PetriNet parse_pnml_file(const std::string& path);

void serialize_pnml(const PetriNet& net, std::ostream& sink);

/// Compact JSON dump (ids, labels, arcs) for debugging and tests.
std::string to_debug_json(const PetriNet& net);

}  // namespace dream
