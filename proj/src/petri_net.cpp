#include "dream/petri_net.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <deque>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "dream/event_log.hpp"  // ParseError / ValidationError

namespace dream {

int Marking::total() const {
  int s = 0;
  for (int t : tokens) s += t;
  return s;
}

std::optional<std::size_t> PetriNet::place_index(const std::string& id) const {
  for (std::size_t i = 0; i < places.size(); ++i)
    if (places[i] == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> PetriNet::transition_index(const std::string& id) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (transitions[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> PetriNet::transition_by_label(
    const std::string& label) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (!transitions[i].hidden() && transitions[i].label == label) return i;
  return std::nullopt;
}

bool PetriNet::enabled(const Marking& m, std::size_t t) const {
  for (std::size_t p : pre[t])
    if (m.tokens[p] < 1) return false;
  return true;
}

int PetriNet::fire(Marking& m, std::size_t t, bool force) const {
  int shortfall = 0;
  for (std::size_t p : pre[t])
    if (m.tokens[p] < 1) ++shortfall;
  if (shortfall > 0 && !force) {
    throw ValidationError("transition '" + transitions[t].id +
                          "' is not enabled");
  }
  for (std::size_t p : pre[t])
    if (m.tokens[p] > 0) --m.tokens[p];
  for (std::size_t p : post[t]) ++m.tokens[p];
  return shortfall;
}

Marking PetriNet::default_initial_marking() const {
  Marking m;
  m.tokens.assign(places.size(), 0);
  if (source_place) m.tokens[*source_place] = 1;
  return m;
}

StructuralReport structural_check(const PetriNet& net) {
  StructuralReport report;
  std::vector<bool> has_in(net.places.size(), false);
  std::vector<bool> has_out(net.places.size(), false);
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (std::size_t p : net.pre[t]) has_out[p] = true;
    for (std::size_t p : net.post[t]) has_in[p] = true;
  }
  for (std::size_t p = 0; p < net.places.size(); ++p) {
    if (!has_in[p]) report.source_candidates.push_back(p);
    if (!has_out[p]) report.sink_candidates.push_back(p);
  }
  report.unique_source = report.source_candidates.size() == 1;
  report.unique_sink = report.sink_candidates.size() == 1;
  if (!report.unique_source || !report.unique_sink) {
    return report;  // path analysis needs a source and a sink
  }

  // Nodes: places [0, P), transitions [P, P+T). Forward reach from source,
  // backward reach from sink; every node must be in both.
  const std::size_t np = net.places.size();
  const std::size_t n = np + net.transitions.size();
  std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (std::size_t p : net.pre[t]) {
      fwd[p].push_back(np + t);
      bwd[np + t].push_back(p);
    }
    for (std::size_t p : net.post[t]) {
      fwd[np + t].push_back(p);
      bwd[p].push_back(np + t);
    }
  }
  auto reach = [&](std::size_t start, const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
    }
    return seen;
  };
  const auto from_source = reach(report.source_candidates[0], fwd);
  const auto to_sink = reach(report.sink_candidates[0], bwd);
  for (std::size_t i = 0; i < n; ++i) {
    if (from_source[i] && to_sink[i]) continue;
    report.off_path_nodes.push_back(
        i < np ? net.places[i] : net.transitions[i - np].id);
  }
  return report;
}

namespace {

namespace pt = boost::property_tree;

bool looks_hidden(const std::string& name, bool invisible_flag) {
  if (invisible_flag || name.empty()) return true;
  return name.rfind("tau", 0) == 0 || name.rfind("Inv_", 0) == 0;
}

void validate_unique_labels(const PetriNet& net) {
  std::set<std::string> seen;
  for (const auto& t : net.transitions) {
    if (t.hidden()) continue;
    if (!seen.insert(t.label).second) {
      throw ValidationError("duplicate observable label '" + t.label +
                            "': the label map must be one-to-one");
    }
  }
}

}  // namespace

PetriNet parse_pnml(std::istream& source) {
  pt::ptree doc;
  try {
    pt::read_xml(source, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed PNML at line " + std::to_string(e.line()) +
                     ": " + e.message());
  }
  const auto pnml = doc.get_child_optional("pnml");
  if (!pnml) throw ParseError("missing <pnml> root element");
  const pt::ptree* net_node = nullptr;
  if (auto n = pnml->get_child_optional("net")) net_node = &*n;
  if (!net_node) throw ParseError("missing <net> element");
  // Nodes may sit directly under <net> or inside a <page>.
  const pt::ptree* container = net_node;
  if (auto page = net_node->get_child_optional("page")) container = &*page;

  PetriNet net;
  std::map<std::string, bool> is_place;
  std::vector<std::tuple<std::string, std::string, std::string>> arcs;
  std::map<std::string, int> initial_tokens;

  for (const auto& [tag, node] : *container) {
    if (tag == "place") {
      const auto id = node.get_optional<std::string>("<xmlattr>.id");
      if (!id) throw ParseError("place without id");
      if (is_place.count(*id) || net.transition_index(*id))
        throw ValidationError("duplicate node id '" + *id + "'");
      net.places.push_back(*id);
      is_place[*id] = true;
      if (auto tokens = node.get_optional<std::string>("initialMarking.text")) {
        initial_tokens[*id] = std::stoi(*tokens);
      }
    } else if (tag == "transition") {
      const auto id = node.get_optional<std::string>("<xmlattr>.id");
      if (!id) throw ParseError("transition without id");
      if (is_place.count(*id) || net.transition_index(*id))
        throw ValidationError("duplicate node id '" + *id + "'");
      std::string name = node.get<std::string>("name.text", "");
      bool invisible = false;
      for (const auto& [ttag, tnode] : node) {
        if (ttag != "toolspecific") continue;
        const auto act = tnode.get_optional<std::string>("<xmlattr>.activity");
        if (act && *act == "$invisible$") invisible = true;
        if (tnode.get_optional<std::string>("visible") &&
            tnode.get<std::string>("visible") == "false") {
          invisible = true;
        }
      }
      Transition t;
      t.id = *id;
      t.label = looks_hidden(name, invisible) ? "" : name;
      net.transitions.push_back(std::move(t));
      is_place[*id] = false;
    } else if (tag == "arc") {
      const auto id = node.get<std::string>("<xmlattr>.id", "");
      const auto from = node.get_optional<std::string>("<xmlattr>.source");
      const auto to = node.get_optional<std::string>("<xmlattr>.target");
      if (!from || !to) throw ParseError("arc '" + id + "' missing source/target");
      arcs.emplace_back(id, *from, *to);
    }
  }

  net.pre.assign(net.transitions.size(), {});
  net.post.assign(net.transitions.size(), {});
  for (const auto& [id, from, to] : arcs) {
    auto fit = is_place.find(from);
    auto tit = is_place.find(to);
    if (fit == is_place.end() || tit == is_place.end()) {
      throw ValidationError("arc '" + id + "' references unknown node");
    }
    if (fit->second == tit->second) {
      throw ValidationError("arc '" + id +
                            "' connects two nodes of the same kind");
    }
    if (fit->second) {
      net.pre[*net.transition_index(to)].push_back(*net.place_index(from));
    } else {
      net.post[*net.transition_index(from)].push_back(*net.place_index(to));
    }
  }
  validate_unique_labels(net);

  const auto report = structural_check(net);
  if (report.unique_source) net.source_place = report.source_candidates[0];
  if (report.unique_sink) net.sink_place = report.sink_candidates[0];

  if (initial_tokens.empty()) {
    net.initial_marking = net.default_initial_marking();
  } else {
    net.initial_marking.tokens.assign(net.places.size(), 0);
    for (const auto& [id, n] : initial_tokens)
      net.initial_marking.tokens[*net.place_index(id)] = n;
  }
  return net;
}

PetriNet parse_pnml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PNML file: " + path);
  return parse_pnml(in);
}

void serialize_pnml(const PetriNet& net, std::ostream& sink) {
  sink << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<pnml><net id=\"net1\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n";
  for (std::size_t p = 0; p < net.places.size(); ++p) {
    sink << "  <place id=\"" << net.places[p] << "\">";
    if (net.initial_marking.tokens.size() == net.places.size() &&
        net.initial_marking.tokens[p] > 0) {
      sink << "<initialMarking><text>" << net.initial_marking.tokens[p]
           << "</text></initialMarking>";
    }
    sink << "</place>\n";
  }
  for (const auto& t : net.transitions) {
    sink << "  <transition id=\"" << t.id << "\">";
    if (!t.hidden()) {
      sink << "<name><text>" << t.label << "</text></name>";
    } else {
      sink << "<toolspecific tool=\"ProM\" version=\"6.4\" "
              "activity=\"$invisible$\"/>";
    }
    sink << "</transition>\n";
  }
  std::size_t arc_no = 0;
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (std::size_t p : net.pre[t]) {
      sink << "  <arc id=\"a" << arc_no++ << "\" source=\"" << net.places[p]
           << "\" target=\"" << net.transitions[t].id << "\"/>\n";
    }
    for (std::size_t p : net.post[t]) {
      sink << "  <arc id=\"a" << arc_no++ << "\" source=\""
           << net.transitions[t].id << "\" target=\"" << net.places[p]
           << "\"/>\n";
    }
  }
  sink << "</net></pnml>\n";
}

std::string to_debug_json(const PetriNet& net) {
  nlohmann::ordered_json j;
  j["places"] = net.places;
  j["transitions"] = nlohmann::ordered_json::array();
  for (const auto& t : net.transitions) {
    nlohmann::ordered_json tj;
    tj["id"] = t.id;
    if (t.hidden()) tj["label"] = nullptr;
    else tj["label"] = t.label;
    j["transitions"].push_back(std::move(tj));
  }
  j["arcs"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (std::size_t p : net.pre[t])
      j["arcs"].push_back({{"from", net.places[p]}, {"to", net.transitions[t].id}});
    for (std::size_t p : net.post[t])
      j["arcs"].push_back({{"from", net.transitions[t].id}, {"to", net.places[p]}});
  }
  j["initial_marking"] = net.initial_marking.tokens;
  return j.dump(2);
}

}  // namespace dream
