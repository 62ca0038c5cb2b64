#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "dream/event_log.hpp"
#include "dream/petri_net.hpp"

using namespace dream;

namespace {

const char* kLinearNet = R"(<?xml version="1.0"?>
<pnml><net id="n1">
  <place id="p0"><initialMarking><text>1</text></initialMarking></place>
  <place id="p1"/>
  <transition id="t0"><name><text>A</text></name></transition>
  <arc id="a0" source="p0" target="t0"/>
  <arc id="a1" source="t0" target="p1"/>
</net></pnml>)";

PetriNet linear_net() {
  std::istringstream in(kLinearNet);
  return parse_pnml(in);
}

}  // namespace

TEST_CASE("parse a linear PNML net") {
  const PetriNet net = linear_net();
  CHECK(net.place_count() == 2);
  CHECK(net.transition_count() == 1);
  CHECK(net.transitions[0].label == "A");
  REQUIRE(net.source_place);
  REQUIRE(net.sink_place);
  CHECK(*net.source_place == *net.place_index("p0"));
  CHECK(*net.sink_place == *net.place_index("p1"));
  CHECK(net.initial_marking.tokens == std::vector<int>{1, 0});
}

TEST_CASE("hidden transition conventions") {
  auto parse_one = [](const std::string& transition_xml) {
    std::istringstream in(
        "<pnml><net id=\"n\"><place id=\"p0\"/><place id=\"p1\"/>" +
        transition_xml +
        "<arc id=\"a0\" source=\"p0\" target=\"t\"/>"
        "<arc id=\"a1\" source=\"t\" target=\"p1\"/></net></pnml>");
    return parse_pnml(in);
  };
  CHECK(parse_one("<transition id=\"t\"/>").transitions[0].hidden());
  CHECK(parse_one("<transition id=\"t\"><name><text>tau_1</text></name>"
                  "</transition>").transitions[0].hidden());
  CHECK(parse_one("<transition id=\"t\"><name><text>Inv_join</text></name>"
                  "</transition>").transitions[0].hidden());
  CHECK(parse_one("<transition id=\"t\"><name><text>B</text></name>"
                  "<toolspecific tool=\"ProM\" version=\"6\" "
                  "activity=\"$invisible$\"/></transition>")
            .transitions[0].hidden());
  CHECK_FALSE(parse_one("<transition id=\"t\"><name><text>B</text></name>"
                        "</transition>").transitions[0].hidden());
}

TEST_CASE("duplicate observable labels are rejected") {
  std::istringstream in(
      "<pnml><net id=\"n\"><place id=\"p0\"/><place id=\"p1\"/>"
      "<transition id=\"t0\"><name><text>A</text></name></transition>"
      "<transition id=\"t1\"><name><text>A</text></name></transition>"
      "<arc id=\"a0\" source=\"p0\" target=\"t0\"/>"
      "<arc id=\"a1\" source=\"p0\" target=\"t1\"/>"
      "<arc id=\"a2\" source=\"t0\" target=\"p1\"/>"
      "<arc id=\"a3\" source=\"t1\" target=\"p1\"/>"
      "</net></pnml>");
  CHECK_THROWS_AS(parse_pnml(in), ValidationError);
}

TEST_CASE("arc referencing unknown node is rejected") {
  std::istringstream in(
      "<pnml><net id=\"n\"><place id=\"p0\"/>"
      "<transition id=\"t0\"/>"
      "<arc id=\"a0\" source=\"p0\" target=\"nope\"/></net></pnml>");
  CHECK_THROWS_AS(parse_pnml(in), ValidationError);
}

TEST_CASE("enabledness") {
  PetriNet net;
  net.places = {"p0", "p1"};
  net.transitions = {{"t", "A"}, {"t2", "B"}, {"t3", "C"}};
  net.pre = {{0}, {0, 1}, {}};
  net.post = {{1}, {}, {0}};
  Marking m{{1, 0}};
  CHECK(net.enabled(m, 0));        // single input satisfied
  CHECK_FALSE(net.enabled(m, 1));  // p1 empty
  CHECK(net.enabled(m, 2));        // empty preset is vacuously enabled
}

TEST_CASE("firing semantics") {
  const PetriNet net = linear_net();
  SUBCASE("plain fire moves the token") {
    Marking m{{1, 0}};
    CHECK(net.fire(m, 0) == 0);
    CHECK(m.tokens == std::vector<int>{0, 1});
  }
  SUBCASE("fan-out produces one token per output place") {
    PetriNet fan;
    fan.places = {"p0", "p1", "p2"};
    fan.transitions = {{"t", "A"}};
    fan.pre = {{0}};
    fan.post = {{1, 2}};
    Marking m{{1, 0, 0}};
    fan.fire(m, 0);
    CHECK(m.tokens == std::vector<int>{0, 1, 1});
  }
  SUBCASE("unforced fire on a disabled transition throws") {
    Marking m{{0, 0}};
    CHECK_THROWS_AS(net.fire(m, 0), ValidationError);
  }
  SUBCASE("forced fire reports the shortfall") {
    Marking m{{0, 0}};
    CHECK(net.fire(m, 0, true) == 1);
    CHECK(m.tokens == std::vector<int>{0, 1});
  }
}

TEST_CASE("fire conserves tokens per arc counts") {
  PetriNet net;
  net.places = {"p0", "p1", "p2"};
  net.transitions = {{"t", "A"}};
  net.pre = {{0}};
  net.post = {{1, 2}};
  Marking m{{1, 0, 0}};
  const int before = m.total();
  net.fire(m, 0);
  CHECK(m.total() - before ==
        static_cast<int>(net.post[0].size()) -
            static_cast<int>(net.pre[0].size()));
}

TEST_CASE("structural checks") {
  SUBCASE("linear net passes") {
    const auto report = structural_check(linear_net());
    CHECK(report.ok());
  }
  SUBCASE("isolated place is flagged") {
    PetriNet net = linear_net();
    net.places.push_back("lonely");
    const auto report = structural_check(net);
    CHECK_FALSE(report.ok());
    // the lonely place is both a source and a sink candidate
    CHECK(report.source_candidates.size() == 2);
  }
  SUBCASE("two source candidates flagged as ambiguous") {
    PetriNet net = linear_net();
    net.places.push_back("p2");
    net.pre[0].push_back(2);  // second input, never fed
    const auto report = structural_check(net);
    CHECK_FALSE(report.unique_source);
    CHECK(report.source_candidates.size() == 2);
  }
}

TEST_CASE("PNML round-trip is structurally identical") {
  std::istringstream in(
      "<pnml><net id=\"n\"><place id=\"p0\">"
      "<initialMarking><text>1</text></initialMarking></place>"
      "<place id=\"p1\"/><place id=\"p2\"/>"
      "<transition id=\"t0\"><name><text>A</text></name></transition>"
      "<transition id=\"t1\"/>"
      "<arc id=\"a0\" source=\"p0\" target=\"t0\"/>"
      "<arc id=\"a1\" source=\"t0\" target=\"p1\"/>"
      "<arc id=\"a2\" source=\"p1\" target=\"t1\"/>"
      "<arc id=\"a3\" source=\"t1\" target=\"p2\"/>"
      "</net></pnml>");
  const PetriNet net = parse_pnml(in);
  std::ostringstream out;
  serialize_pnml(net, out);
  std::istringstream back_in(out.str());
  const PetriNet back = parse_pnml(back_in);
  CHECK(back.places == net.places);
  REQUIRE(back.transition_count() == net.transition_count());
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    CHECK(back.transitions[t].id == net.transitions[t].id);
    CHECK(back.transitions[t].label == net.transitions[t].label);
    CHECK(back.pre[t] == net.pre[t]);
    CHECK(back.post[t] == net.post[t]);
  }
  CHECK(back.initial_marking == net.initial_marking);
  CHECK(to_debug_json(back) == to_debug_json(net));
}
