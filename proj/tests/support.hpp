#pragma once

// Small hand-built networks and helpers shared by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "citylight/road_network.hpp"
#include "citylight/traffic_sim.hpp"

namespace citylight::testing {

// One intersection "c" with an incoming road in_A and an outgoing road
// out_A on every present approach A (N, E, S, W).
struct Cross {
  std::shared_ptr<const RoadNetwork> net;
  std::array<int, 4> in{-1, -1, -1, -1};   // road index per approach
  std::array<int, 4> out{-1, -1, -1, -1};

  int in_lane(int approach, int turn) const { return net->road(in[approach]).lanes[turn]; }
  int out_lane(int approach, int lane) const { return net->road(out[approach]).lanes[lane]; }
};

inline Cross make_cross(double length = 200.0, double speed = 10.0, std::array<bool, 4> legs = {true, true, true, true},
                        bool signalized = true) {
  static const char* kNames[4] = {"N", "E", "S", "W"};
  std::vector<Lane> lanes;
  std::vector<Road> roads;
  Intersection node;
  node.id = "c";
  node.signalized = signalized;
  node.lane_table.fill(kNoLane);
  Cross c;
  auto add_road = [&](const std::string& id, int from, int to) {
    Road r;
    r.id = id;
    r.from = from;
    r.to = to;
    for (int t = 0; t < 3; ++t) {
      r.lanes[t] = static_cast<int>(lanes.size());
      lanes.push_back(Lane{id + "_" + std::to_string(t), length, speed,
                           static_cast<int>(std::floor(length / kDefaultJamSpacing))});
    }
    roads.push_back(r);
    return static_cast<int>(roads.size()) - 1;
  };
  for (int a = 0; a < 4; ++a) {
    if (!legs[a]) continue;
    c.in[a] = add_road(std::string("in_") + kNames[a], -1, 0);
    c.out[a] = add_road(std::string("out_") + kNames[a], 0, -1);
    for (int t = 0; t < 3; ++t) {
      node.lane_table[3 * a + t] = roads[c.in[a]].lanes[t];
      node.lane_table[12 + 3 * a + t] = roads[c.out[a]].lanes[t];
    }
  }
  c.net = std::make_shared<const RoadNetwork>(std::move(lanes), std::move(roads), std::vector<Intersection>{node});
  return c;
}

inline FlowSpec flow(std::vector<int> route, int start, int end, int interval) {
  FlowSpec f;
  f.route = std::move(route);
  f.start_time = start;
  f.end_time = end;
  f.interval = interval;
  return f;
}

// A single vehicle departing at `t`.
inline FlowSpec one_vehicle(std::vector<int> route, int t) { return flow(std::move(route), t, t, 1); }

inline std::vector<SlotMask> all_red(const SimWorld& w) {
  return std::vector<SlotMask>(w.network().intersections().size());
}

inline std::vector<SlotMask> all_green(const SimWorld& w) {
  return std::vector<SlotMask>(w.network().intersections().size(), SlotMask().set());
}

inline void run_ticks(SimWorld& w, int n, const std::vector<SlotMask>& permitted) {
  for (int i = 0; i < n; ++i) w.step(permitted);
}

}  // namespace citylight::testing
