#include <doctest.h>

#include "citylight/features.hpp"
#include "citylight/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace citylight;
using namespace citylight::testing;

namespace {

// Brute-force view of every vehicle around intersection i.
std::vector<oracle::Car> cars_at(const SimWorld& w, int i, std::array<double, 24>& lengths, double& speed_limit) {
  std::vector<oracle::Car> cars;
  const RoadNetwork& net = w.network();
  lengths.fill(1.0);
  for (int slot = 0; slot < kNumSlots; ++slot) {
    const int li = net.intersection(i).lane_table[slot];
    if (li == kNoLane) continue;
    lengths[slot] = net.lane(li).length;
    speed_limit = net.lane(li).speed_limit;
    for (int vi : w.lane_state(li).vehicles) {
      const Vehicle& v = w.vehicle(vi);
      cars.push_back({slot, slot < 12 ? net.lane(li).length - v.lane_pos : v.lane_pos, v.speed});
    }
  }
  return cars;
}

// A busy 2x2 grid after `ticks` seconds of random signal masks.
SimWorld busy_grid(std::uint64_t seed, int ticks) {
  GridDemand d;
  d.seed = seed;
  d.vehicles_per_hour = 900;
  auto g = gen_grid(2, 2, 80.0, d);
  SimWorld w(std::make_shared<const RoadNetwork>(g.network), g.flows);
  Rng rng = make_rng(seed, "masks");
  std::vector<SlotMask> masks(4);
  for (int t = 0; t < ticks; ++t) {
    if (t % 10 == 0) {
      for (auto& m : masks) m = SlotMask(rng() & 0xFFF);
    }
    w.step(masks);
  }
  return w;
}

}  // namespace

TEST_CASE("per-vehicle delay and queue status") {
  CHECK(vehicle_delay(0.0, 16.7) == 1.0);
  CHECK(vehicle_delay(16.7, 16.7) == 0.0);
  CHECK(vehicle_delay(5.0, 20.0) == 0.75);
  CHECK(vehicle_queue_status(0.0) == 1);
  CHECK(vehicle_queue_status(0.3) == 0);
  CHECK(vehicle_queue_status(10.0) == 0);
}

TEST_CASE("zone membership by distance to the intersection") {
  const auto c = make_cross(200.0, 10.0);
  const std::vector<int> left{c.in[0], c.out[1]};
  SimWorld w(c.net, {one_vehicle(left, 0), one_vehicle(left, 4), one_vehicle(left, 14)});
  run_ticks(w, 19, all_green(w));
  // Distances from the stop line are now 10, 50 and 150.
  const ZoneStats s = zone_stats(w, 0, 100.0);
  CHECK(s.x[0] == 2);
  CHECK(s.d[0] == 0.0);
  CHECK(s.q[0] == 0);
  CHECK(zone_stats(w, 0, 60.0).x[0] == 2);
  CHECK(zone_stats(w, 0, 50.0).x[0] == 1);  // strict: distance 50 is outside k = 50
  CHECK(zone_stats(w, 0, 200.0).x[0] == 3);

  std::array<double, 24> lengths;
  double limit = 0;
  const auto cars = cars_at(w, 0, lengths, limit);
  const ZoneStats ref = oracle::zone(cars, lengths, limit, 100.0);
  CHECK(ref.x == s.x);
}

TEST_CASE("zone reach is capped at the lane length") {
  const auto c = make_cross(40.0, 10.0);
  SimWorld w(c.net, {flow({c.in[0], c.out[1]}, 0, 3, 1)});
  run_ticks(w, 10, all_red(w));
  const ZoneStats s60 = zone_stats(w, 0, 60.0);
  CHECK(s60.x[0] == 4);
  CHECK(s60.q[0] == 4);
  CHECK(s60.d[0] == 1.0);
  const ZoneStats whole = zone_stats(w, 0, 1000.0);
  CHECK(whole.x == s60.x);
  CHECK(whole.d == s60.d);
  CHECK(whole.q == s60.q);
}

TEST_CASE("downstream lanes measure from their entry") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {one_vehicle({c.in[0], c.out[2]}, 0)});
  run_ticks(w, 25, all_green(w));
  // Discharged at tick 19, then 5 ticks at 10 m/s on the south exit.
  const ZoneStats s = zone_stats(w, 0, 60.0);
  int slot = -1;
  for (int j = 18; j < 21; ++j) {
    if (s.x[j] > 0) slot = j;
  }
  REQUIRE(slot >= 0);
  CHECK(zone_stats(w, 0, 50.0).x[slot] == 0);
  CHECK(zone_stats(w, 0, 51.0).x[slot] == 1);
}

TEST_CASE("zone stats agree with the brute-force oracle on busy grids") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SimWorld w = busy_grid(seed, 300);
    for (int i = 0; i < 4; ++i) {
      std::array<double, 24> lengths;
      double limit = 0;
      const auto cars = cars_at(w, i, lengths, limit);
      ZoneStats prev;
      for (double k : kZoneDistances) {
        const ZoneStats s = zone_stats(w, i, k);
        const ZoneStats ref = oracle::zone(cars, lengths, limit, k);
        for (int j = 0; j < kNumSlots; ++j) {
          CHECK(s.x[j] == ref.x[j]);
          CHECK(s.q[j] == ref.q[j]);
          CHECK(s.d[j] == doctest::Approx(ref.d[j]).epsilon(1e-12));
          CHECK(s.q[j] <= s.x[j]);
          CHECK(s.d[j] >= 0.0);
          CHECK(s.d[j] <= 1.0);
          if (k > kZoneDistances[0]) {
            CHECK(prev.x[j] <= s.x[j]);
            CHECK(prev.q[j] <= s.q[j]);
          }
        }
        prev = s;
      }
    }
  }
}

TEST_CASE("phase aggregates and pressures") {
  ZoneStats s;
  s.x[0] = 4;
  s.x[6] = 2;
  CHECK(phase_aggregate(s, PhaseId(1), StatGroup::X) == 6);
  for (int j : {15, 16, 17, 21, 22, 23}) s.x[j] = 1;
  CHECK(phase_pressure(s, PhaseId(1), StatGroup::X) == doctest::Approx(4.0));
  CHECK(phase_aggregate(ZoneStats{}, PhaseId(3), StatGroup::Q) == 0);
  CHECK(phase_pressure(ZoneStats{}, PhaseId(3), StatGroup::D) == 0);

  ZoneStats down_only;
  for (int j : {18, 19, 20, 12, 13, 14}) down_only.x[j] = 1.5;
  CHECK(phase_pressure(down_only, PhaseId(2), StatGroup::X) == doctest::Approx(-3.0));

  // Three-leg: slot 6 missing contributes nothing.
  ZoneStats three;
  three.x[0] = 5;
  CHECK(phase_aggregate(three, PhaseId(1), StatGroup::X) == 5);
}

TEST_CASE("moving a vehicle downstream shifts pressure by -(1 + 1/3)") {
  Rng rng = make_rng(3, "pressure");
  for (int trial = 0; trial < 200; ++trial) {
    ZoneStats s;
    for (double& v : s.x) v = uniform_index(rng, 6);
    const int p = uniform_index(rng, 8);
    const auto& row = oracle::kPhases[p];
    const int from = row.up[uniform_index(rng, 2)];
    if (s.x[from] == 0) s.x[from] = 1;
    const int to = row.down[uniform_index(rng, 6)];
    const double before = phase_pressure(s, PhaseId::from_index(p), StatGroup::X);
    s.x[from] -= 1;
    s.x[to] += 1;
    const double after = phase_pressure(s, PhaseId::from_index(p), StatGroup::X);
    CHECK(after - before == doctest::Approx(-(1.0 + 1.0 / 3.0)));
  }
}

TEST_CASE("state vector layout") {
  SUBCASE("empty network at t = 0") {
    const auto c = make_cross();
    SimWorld w(c.net, {});
    const StateVector s = build_state(w, 0, PhaseId(1), 0);
    CHECK(s.size() == 154);
    for (int i = 0; i < kStatDims; ++i) CHECK(s[i] == 0.0);
    CHECK(s[kPhaseOneHotOffset] == 1.0);
    for (int p = 1; p < 8; ++p) CHECK(s[kPhaseOneHotOffset + p] == 0.0);
    CHECK(s[kTimeIndex] == 0.0);
    CHECK(s[kDurationIndex] == 0.0);
  }
  SUBCASE("entries match the standalone operations") {
    const SimWorld w = busy_grid(9, 400);
    for (int i = 0; i < 4; ++i) {
      const StateVector s = build_state(w, i, PhaseId(3), 15);
      double onehot = 0;
      for (int p = 0; p < 8; ++p) onehot += s[kPhaseOneHotOffset + p];
      CHECK(onehot == 1.0);
      CHECK(s[kPhaseOneHotOffset + 2] == 1.0);
      CHECK(s[kTimeIndex] == doctest::Approx(400.0 / 3600.0));
      CHECK(s[kDurationIndex] == doctest::Approx(0.5));
      for (int ki = 0; ki < 3; ++ki) {
        const ZoneStats z = zone_stats(w, i, kZoneDistances[ki]);
        for (int p = 0; p < 8; ++p) {
          for (int g = 0; g < 3; ++g) {
            CHECK(s[state_index(g, ki, p)] == oracle::aggregate(z, p, g));
            CHECK(s[state_index(g + 3, ki, p)] == doctest::Approx(oracle::pressure(z, p, g)).epsilon(1e-12));
          }
          CHECK(s[state_index(2, ki, p)] <= s[state_index(0, ki, p)]);  // q aggregate <= x aggregate
        }
      }
    }
    CHECK(state_index(0, 0, 0) == 0);
    CHECK(state_index(5, 2, 7) == 143);
  }
  SUBCASE("parallel and serial builders agree") {
    const SimWorld w = busy_grid(4, 250);
    std::vector<SignalView> signals{{PhaseId(1), 3}, {PhaseId(2), 7}, {PhaseId(5), 0}, {PhaseId(8), 29}};
    CHECK(build_states(w, signals) == build_states_serial(w, signals));
    CHECK_THROWS(build_states(w, std::span(signals).first(2)));
  }
}
