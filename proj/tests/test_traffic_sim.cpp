#include <doctest.h>

#include "citylight/traffic_sim.hpp"
#include "support.hpp"

using namespace citylight;
using namespace citylight::testing;

namespace {

int count_on_road(const SimWorld& w, int road) {
  int n = 0;
  for (int lane : w.network().road(road).lanes) n += w.occupancy(lane);
  return n;
}

SlotMask only(std::initializer_list<int> slots) {
  SlotMask m;
  for (int s : slots) m.set(s);
  return m;
}

}  // namespace

TEST_CASE("free-flow ticks round up") {
  CHECK(freeflow_ticks(200.0, 10.0) == 20);
  CHECK(freeflow_ticks(300.0, 13.89) == 22);
  CHECK(freeflow_ticks(30.0, 7.0) == 5);
}

TEST_CASE("a lone vehicle under green is served at free-flow speed") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {one_vehicle({c.in[0], c.out[2]}, 0)});
  const auto green = all_green(w);
  w.step(green);
  const Vehicle& v = w.vehicle(0);
  CHECK(v.lane == c.in_lane(0, 1));  // through movement uses the through lane
  CHECK(v.lane_pos == doctest::Approx(10.0));
  CHECK(v.speed == 10.0);
  CHECK(v.freeflow_trip_time == 40);
  run_ticks(w, 39, green);
  CHECK(w.served_count() == 1);
  CHECK(w.vehicle(0).arrive_time == 40);
  CHECK(vehicle_delay_index(w.vehicle(0), *c.net, w.clock()) == doctest::Approx(1.0));
  CHECK(fleet_delay_index(w) == doctest::Approx(1.0));
}

TEST_CASE("a red movement queues the vehicle at the stop line") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {one_vehicle({c.in[0], c.out[2]}, 0)});
  run_ticks(w, 25, all_red(w));
  const Vehicle& v = w.vehicle(0);
  CHECK(v.status == VehicleStatus::Queued);
  CHECK(v.speed == 0.0);
  CHECK(v.lane_pos == doctest::Approx(200.0));
  CHECK(w.lane_state(v.lane).queued == 1);
  CHECK(w.lane_state(v.lane).blocked_seconds == 6);  // queued since tick 19
}

TEST_CASE("ten queued vehicles, ten seconds of green, five discharges") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {flow({c.in[0], c.out[2]}, 0, 9, 1)});
  run_ticks(w, 60, all_red(w));
  const int lane = c.in_lane(0, 1);
  REQUIRE(w.lane_state(lane).queued == 10);

  // Tick oracle: a discharge needs the movement green and 2 s since the last one.
  std::vector<SlotMask> green(1, only({1}));
  int expected = 0;
  int last = -1'000'000;
  for (int k = 0; k < 10; ++k) {
    const int t = w.clock();
    if (t - last >= 2) {
      ++expected;
      last = t;
    }
    w.step(green);
    CHECK(count_on_road(w, c.out[2]) == expected);
  }
  CHECK(expected == 5);
  CHECK(w.lane_state(lane).queued == 5);
}

TEST_CASE("right turns flow during all-red") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {one_vehicle({c.in[0], c.out[3]}, 0)});  // N in, right turn exits West
  run_ticks(w, 21, all_red(w));
  CHECK(w.vehicle(0).leg == 1);
  CHECK(count_on_road(w, c.out[3]) == 1);
}

TEST_CASE("unsignalized intersections never gate") {
  const auto c = make_cross(200.0, 10.0, {true, true, true, true}, false);
  SimWorld w(c.net, {one_vehicle({c.in[1], c.out[3]}, 0)});
  run_ticks(w, 40, all_red(w));
  CHECK(w.served_count() == 1);
}

TEST_CASE("spawns are deferred, never dropped, when the entry lane is full") {
  const auto c = make_cross(60.0, 10.0);  // capacity 8
  SimWorld w(c.net, {flow({c.in[0], c.out[2]}, 0, 19, 1)});
  const auto red = all_red(w);
  for (int t = 0; t < 40; ++t) {
    w.step(red);
    CHECK(w.spawned_count() == w.served_count() + w.active_count() + w.pending_count());
    CHECK(w.occupancy(c.in_lane(0, 1)) <= 8);
  }
  CHECK(w.spawned_count() == 20);
  CHECK(w.pending_count() == 12);
  // Deferred vehicles keep their scheduled time but depart later.
  CHECK(w.vehicle(8).scheduled_time == 8);
}

TEST_CASE("final road uses the least-occupied lane") {
  const auto c = make_cross(200.0, 10.0);
  SimWorld w(c.net, {flow({c.in[0]}, 0, 2, 1)});  // route ends on the approach
  w.step(all_red(w));
  CHECK(w.vehicle(0).lane == c.in_lane(0, 0));
  w.step(all_red(w));
  CHECK(w.vehicle(1).lane == c.in_lane(0, 1));
  w.step(all_red(w));
  CHECK(w.vehicle(2).lane == c.in_lane(0, 2));
  // Vehicles ending on this road leave at the stop line regardless of the signal.
  run_ticks(w, 30, all_red(w));
  CHECK(w.served_count() == 3);
}

TEST_CASE("vehicle delay index") {
  const auto c = make_cross(700.0, 10.0);
  Vehicle v;
  v.route = {c.in[0]};
  v.leg_freeflow = {70};
  v.freeflow_trip_time = 100;
  SUBCASE("served after 50 s of queueing") {
    v.status = VehicleStatus::Served;
    v.depart_time = 0;
    v.arrive_time = 150;
    CHECK(vehicle_delay_index(v, *c.net, 200) == doctest::Approx(1.5));
  }
  SUBCASE("active with no delay accrued") {
    v.status = VehicleStatus::Enroute;
    v.depart_time = 0;
    v.lane = c.in_lane(0, 1);
    v.lane_pos = 0.0;
    CHECK(vehicle_delay_index(v, *c.net, 30) == doctest::Approx(1.0));
  }
  SUBCASE("not departed") {
    CHECK_THROWS_AS(vehicle_delay_index(v, *c.net, 10), std::logic_error);
  }
}

TEST_CASE("metrics and termination") {
  const auto c = make_cross(200.0, 10.0);
  SUBCASE("no departures gives 1.0") {
    SimWorld w(c.net, {});
    EpisodeMetrics m;
    run_ticks(w, 20, all_red(w));
    evaluate_metrics(w, m);
    CHECK(m.samples.back().delay_index == 1.0);
    CHECK_FALSE(m.terminated_at);
  }
  SUBCASE("held at red long enough crosses the threshold") {
    SimWorld w(c.net, {one_vehicle({c.in[0], c.out[2]}, 0)});
    EpisodeMetrics m;
    for (int k = 0; k < 5; ++k) {
      run_ticks(w, kMetricsPeriod, all_red(w));
      evaluate_metrics(w, m);
    }
    // Delay index at t: (t + 20) / 40 once queued at the stop line.
    CHECK(m.samples[2].delay_index == doctest::Approx(80.0 / 40.0));
    REQUIRE(m.terminated_at);
    CHECK(*m.terminated_at == 40);  // (40 + 20) / 40 = 1.5 >= 1.4
    for (const MetricsSample& s : m.samples) CHECK(s.delay_index >= 1.0);
  }
}

TEST_CASE("step rejects a wrong number of slot masks") {
  const auto c = make_cross();
  SimWorld w(c.net, {});
  CHECK_THROWS(w.step(std::vector<SlotMask>(2)));
}

TEST_CASE("identical inputs give identical worlds") {
  GridDemand d;
  d.seed = 5;
  d.vehicles_per_hour = 600;
  auto g = gen_grid(2, 2, 100.0, d);
  auto net = std::make_shared<const RoadNetwork>(g.network);
  SimWorld a(net, g.flows), b(net, g.flows);
  std::vector<SlotMask> mask(4, only({1, 7}));
  for (int t = 0; t < 600; ++t) {
    if (t % 40 == 20) std::fill(mask.begin(), mask.end(), only({4, 10}));
    if (t % 40 == 0) std::fill(mask.begin(), mask.end(), only({1, 7}));
    a.step(mask);
    b.step(mask);
  }
  CHECK(a.served_count() == b.served_count());
  CHECK(a.served_count() > 0);
  CHECK(fleet_delay_index(a) == fleet_delay_index(b));
}
