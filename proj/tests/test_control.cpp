#include <doctest.h>

#include "citylight/control.hpp"
#include "citylight/rng.hpp"
#include "support.hpp"

using namespace citylight;
using namespace citylight::testing;

namespace {

ControllerState green(int phase, int elapsed) { return ControllerState{PhaseId(phase), elapsed, 0, std::nullopt}; }

ZoneStats stats60() {
  ZoneStats s;
  s.k = 60.0;
  return s;
}

TriggerPolicy policy(TriggerKind kind) {
  TriggerPolicy p;
  p.kind = kind;
  return p;
}

// The four conditions written out directly.
bool trigger_oracle(const ControllerState& cs, const ZoneStats& s, TriggerKind kind) {
  const auto& row = phase_movements(cs.current_phase);
  const double up_q = s.q[row.upstream_slots[0]] + s.q[row.upstream_slots[1]];
  double down_q = 0;
  for (const auto& g : row.downstream_groups) down_q += s.q[g[0]] + s.q[g[1]] + s.q[g[2]];
  const bool c1 = cs.green_elapsed > 30;
  const bool c2 = up_q == 0;
  const bool c3 = down_q >= 8;
  const bool c4 = up_q - down_q / 3 < -5;
  switch (kind) {
    case TriggerKind::TP1: return c1;
    case TriggerKind::TP2: return c1 || c2;
    case TriggerKind::TP3: return c1 || c2 || c3 || c4;
  }
  return false;
}

}  // namespace

TEST_CASE("trigger conditions") {
  SUBCASE("max green") {
    ZoneStats s = stats60();
    s.q[1] = 2;
    CHECK(should_trigger(green(2, 31), s, policy(TriggerKind::TP1)));
    CHECK_FALSE(should_trigger(green(2, 30), s, policy(TriggerKind::TP1)));
  }
  SUBCASE("empty upstream") {
    const ZoneStats s = stats60();
    CHECK(should_trigger(green(2, 10), s, policy(TriggerKind::TP2)));
    CHECK_FALSE(should_trigger(green(2, 10), s, policy(TriggerKind::TP1)));
  }
  SUBCASE("saturated downstream") {
    ZoneStats s = stats60();
    s.q[1] = 3;
    s.q[12] = 3;
    s.q[13] = 3;
    s.q[19] = 3;  // phase 2 downstream queue total 9
    CHECK(should_trigger(green(2, 10), s, policy(TriggerKind::TP3)));
    CHECK_FALSE(should_trigger(green(2, 10), s, policy(TriggerKind::TP2)));
    CHECK(condition_saturated_downstream(green(2, 10), s, policy(TriggerKind::TP3)));
    TriggerPolicy literal = policy(TriggerKind::TP3);
    literal.literal_downstream_equality = true;
    CHECK_FALSE(condition_saturated_downstream(green(2, 10), s, literal));
    s.q[19] = 2;
    CHECK(condition_saturated_downstream(green(2, 10), s, literal));
  }
  SUBCASE("negative queue pressure") {
    ZoneStats s = stats60();
    s.q[0] = 1;
    for (int j : {15, 16, 21}) s.q[j] = 7;  // 1 - 21 / 3 = -6
    CHECK(condition_negative_pressure(green(1, 5), s, policy(TriggerKind::TP3)));
    CHECK(should_trigger(green(1, 5), s, policy(TriggerKind::TP3)));
  }
  SUBCASE("wrong k is rejected") {
    ZoneStats s = stats60();
    s.k = 100.0;
    CHECK_THROWS(should_trigger(green(1, 0), s, policy(TriggerKind::TP1)));
  }
  SUBCASE("names") {
    CHECK(parse_trigger("tp2") == TriggerKind::TP2);
    CHECK(to_string(TriggerKind::TP3) == "tp3");
    CHECK_THROWS(parse_trigger("tp4"));
  }
}

TEST_CASE("trigger policies nest and match the condition oracle") {
  Rng rng = make_rng(2, "triggers");
  for (int trial = 0; trial < 2000; ++trial) {
    ZoneStats s = stats60();
    for (double& q : s.q) q = uniform01(rng) < 0.5 ? 0 : uniform_index(rng, 5);
    const ControllerState cs = green(1 + uniform_index(rng, 8), uniform_index(rng, 40));
    const bool t1 = should_trigger(cs, s, policy(TriggerKind::TP1));
    const bool t2 = should_trigger(cs, s, policy(TriggerKind::TP2));
    const bool t3 = should_trigger(cs, s, policy(TriggerKind::TP3));
    CHECK(t1 == trigger_oracle(cs, s, TriggerKind::TP1));
    CHECK(t2 == trigger_oracle(cs, s, TriggerKind::TP2));
    CHECK(t3 == trigger_oracle(cs, s, TriggerKind::TP3));
    CHECK((!t1 || t2));
    CHECK((!t2 || t3));
  }
}

TEST_CASE("phase requests and all-red") {
  const PhaseMask all = PhaseMask().set();
  SUBCASE("same phase is a no-op") {
    ControllerState cs = green(2, 12);
    cs = request_phase(cs, PhaseId(2), all);
    CHECK(cs.all_red_remaining == 0);
    cs = tick(cs);
    CHECK(cs.green_elapsed == 13);
  }
  SUBCASE("switch costs exactly five red seconds") {
    ControllerState cs = request_phase(green(2, 12), PhaseId(4), all);
    CHECK(cs.pending_phase == PhaseId(4));
    int red = 0;
    while (cs.all_red_remaining > 0) {
      const SlotMask m = permitted_slots(cs);
      CHECK(m == SlotMask().set(2).set(5).set(8).set(11));
      cs = tick(cs);
      ++red;
    }
    CHECK(red == kAllRedSeconds);
    CHECK(cs.current_phase == PhaseId(4));
    CHECK(cs.green_elapsed == 0);
    CHECK_FALSE(cs.pending_phase);
    CHECK(permitted_slots(cs).test(4));
    CHECK(permitted_slots(cs).test(10));
    CHECK_FALSE(permitted_slots(cs).test(1));
  }
  SUBCASE("last red tick activates the pending phase") {
    ControllerState cs{PhaseId(1), 0, 1, PhaseId(3)};
    cs = tick(cs);
    CHECK(cs.current_phase == PhaseId(3));
    CHECK(cs.green_elapsed == 0);
    CHECK(tick(green(1, 7)).green_elapsed == 8);
  }
  SUBCASE("errors") {
    const ControllerState red = request_phase(green(1, 0), PhaseId(2), all);
    CHECK_THROWS_AS(request_phase(red, PhaseId(3), all), std::logic_error);
    const auto c = make_cross(200.0, 10.0, {true, true, true, false});
    const PhaseMask valid = c.net->intersection(0).valid_phases();
    CHECK_THROWS_AS(request_phase(green(1, 0), PhaseId(8), valid), std::invalid_argument);
    CHECK(initial_phase(valid) == PhaseId(1));
    CHECK_THROWS(initial_phase(PhaseMask()));
  }
}

TEST_CASE("all-red stops signalized discharge in the simulator") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {flow({c.in[0], c.out[2]}, 0, 5, 1)});
  ControllerState cs = green(4, 0);  // north through is red
  for (int t = 0; t < 40; ++t) {
    w.step(std::vector<SlotMask>{permitted_slots(cs)});
    cs = tick(cs);
  }
  REQUIRE(w.lane_state(c.in_lane(0, 1)).queued == 6);
  cs = request_phase(cs, PhaseId(2), PhaseMask().set());
  for (int t = 0; t < kAllRedSeconds; ++t) {
    w.step(std::vector<SlotMask>{permitted_slots(cs)});
    CHECK(w.lane_state(c.in_lane(0, 1)).queued == 6);
    cs = tick(cs);
  }
  w.step(std::vector<SlotMask>{permitted_slots(cs)});
  CHECK(w.lane_state(c.in_lane(0, 1)).queued == 5);
}
