#include "citylight/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace citylight {

namespace {
constexpr double kPosEps = 1e-9;
}

int freeflow_ticks(double length, double speed) {
  return std::max(0, static_cast<int>(std::ceil(length / speed - kPosEps)));
}

SimWorld::SimWorld(std::shared_ptr<const RoadNetwork> net, std::vector<FlowSpec> flows, SimParams params)
    : net_(std::move(net)), flows_(std::move(flows)), params_(params) {
  if (!net_) throw std::invalid_argument("SimWorld: null network");
  if (params_.saturation_headway < 1) throw std::invalid_argument("SimWorld: saturation_headway must be >= 1");
  lanes_.resize(net_->lanes().size());
  pending_by_flow_.resize(flows_.size());
  schedule_pos_.assign(flows_.size(), 0);
  for (const FlowSpec& f : flows_) {
    validate_route(f.route, *net_);
    schedule_.push_back(f.spawn_times());
  }
}

int SimWorld::entry_lane_for(const Vehicle& v, int leg) const {
  const Road& road = net_->road(v.route[leg]);
  if (leg + 1 < static_cast<int>(v.route.size())) {
    const auto turn = net_->movement(v.route[leg], v.route[leg + 1]);
    return road.lanes[static_cast<int>(*turn)];
  }
  // Final road: least-occupied lane, ties to the lowest slot.
  int best = road.lanes[0];
  for (int t = 1; t < 3; ++t) {
    if (occupancy(road.lanes[t]) < occupancy(best)) best = road.lanes[t];
  }
  return best;
}

void SimWorld::enter_lane(int vi, int lane) {
  Vehicle& v = vehicles_[vi];
  v.lane = lane;
  v.lane_pos = 0.0;
  v.speed = net_->lane(lane).speed_limit;
  v.status = VehicleStatus::Enroute;
  lanes_[lane].vehicles.push_back(vi);
}

void SimWorld::serve(int vi) {
  Vehicle& v = vehicles_[vi];
  v.status = VehicleStatus::Served;
  v.arrive_time = clock_ + 1;
  v.speed = 0.0;
  v.lane = -1;
  served_ratio_sum_ += static_cast<double>(v.arrive_time - v.depart_time) / v.freeflow_trip_time;
  ++served_;
}

void SimWorld::step(std::span<const SlotMask> permitted) {
  const RoadNetwork& net = *net_;
  if (permitted.size() != net.intersections().size()) {
    throw std::invalid_argument("SimWorld::step: one slot mask per intersection required");
  }
  const int t = clock_;
  const double jam = params_.jam_spacing;

  // (a) spawn, deferring while the entry lane is full
  for (std::size_t f = 0; f < flows_.size(); ++f) {
    auto& pos = schedule_pos_[f];
    while (pos < schedule_[f].size() && schedule_[f][pos] <= t) {
      Vehicle v;
      v.id = static_cast<std::int64_t>(vehicles_.size());
      v.route = flows_[f].route;
      v.scheduled_time = schedule_[f][pos];
      for (int r : v.route) {
        const Lane& l = net.lane(net.road(r).lanes[0]);
        v.leg_freeflow.push_back(freeflow_ticks(l.length, l.speed_limit));
        v.freeflow_trip_time += v.leg_freeflow.back();
      }
      v.freeflow_trip_time = std::max(1, v.freeflow_trip_time);
      vehicles_.push_back(std::move(v));
      pending_by_flow_[f].push_back(static_cast<int>(vehicles_.size()) - 1);
      ++spawned_;
      ++pending_;
      ++pos;
    }
    auto& waiting = pending_by_flow_[f];
    while (!waiting.empty()) {
      const int vi = waiting.front();
      const int lane = entry_lane_for(vehicles_[vi], 0);
      if (occupancy(lane) >= net.lane(lane).capacity) break;
      enter_lane(vi, lane);
      vehicles_[vi].depart_time = t;
      waiting.pop_front();
      --pending_;
    }
  }

  // (b) advance, (c) join the queue at its back
  for (std::size_t li = 0; li < lanes_.size(); ++li) {
    LaneState& ls = lanes_[li];
    const Lane& lane = net.lane(static_cast<int>(li));
    double back = lane.length - ls.queued * jam;
    for (std::size_t idx = 0; idx < ls.vehicles.size(); ++idx) {
      Vehicle& v = vehicles_[ls.vehicles[idx]];
      if (static_cast<int>(idx) < ls.queued) {
        v.lane_pos = std::max(v.lane_pos, lane.length - static_cast<double>(idx) * jam);
        continue;
      }
      const double next = std::max(v.lane_pos, std::min(v.lane_pos + v.speed, back));
      if (next >= back - kPosEps) {
        v.lane_pos = std::max(v.lane_pos, back);
        v.speed = 0.0;
        v.status = VehicleStatus::Queued;
        ++ls.queued;
        back -= jam;
      } else {
        v.lane_pos = next;
      }
    }
    // Vehicles finishing their route leave as soon as they reach the head.
    while (ls.queued > 0 && vehicles_[ls.vehicles.front()].on_final_leg()) {
      serve(ls.vehicles.front());
      ls.vehicles.pop_front();
      --ls.queued;
    }
    ls.discharged_this_tick = false;
  }

  // (d) phase-gated discharge
  const auto& nodes = net.intersections();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Intersection& node = nodes[i];
    for (int slot = 0; slot < kNumUpstreamSlots; ++slot) {
      const int li = node.lane_table[slot];
      if (li == kNoLane) continue;
      LaneState& ls = lanes_[li];
      if (ls.queued == 0) continue;
      const bool allowed = !node.signalized || is_right_turn_slot(slot) || permitted[i][slot];
      if (!allowed || t - ls.last_discharge < params_.saturation_headway) continue;
      const int vi = ls.vehicles.front();
      Vehicle& v = vehicles_[vi];
      const int target = entry_lane_for(v, v.leg + 1);
      if (occupancy(target) >= net.lane(target).capacity) continue;
      ls.vehicles.pop_front();
      --ls.queued;
      ++v.leg;
      enter_lane(vi, target);
      ls.last_discharge = t;
      ls.discharged_this_tick = true;
    }
  }

  for (LaneState& ls : lanes_) {
    if (ls.discharged_this_tick || ls.queued == 0) {
      ls.blocked_seconds = 0;
    } else {
      ++ls.blocked_seconds;
    }
  }
  ++clock_;
}

double vehicle_delay_index(const Vehicle& v, const RoadNetwork& net, int now) {
  if (v.status == VehicleStatus::Pending || v.depart_time < 0 || now < v.depart_time) {
    throw std::logic_error("vehicle_delay_index: vehicle has not departed");
  }
  const double ff = v.freeflow_trip_time;
  if (v.status == VehicleStatus::Served) return (v.arrive_time - v.depart_time) / ff;
  const Lane& lane = net.lane(v.lane);
  int remaining = freeflow_ticks(lane.length - v.lane_pos, lane.speed_limit);
  for (std::size_t leg = v.leg + 1; leg < v.route.size(); ++leg) remaining += v.leg_freeflow[leg];
  return ((now - v.depart_time) + remaining) / ff;
}

double fleet_delay_index(const SimWorld& world) {
  const std::int64_t departed = world.departed_count();
  if (departed == 0) return 1.0;
  double sum = world.served_ratio_sum();
  const RoadNetwork& net = world.network();
  for (std::size_t li = 0; li < net.lanes().size(); ++li) {
    for (int vi : world.lane_state(static_cast<int>(li)).vehicles) {
      sum += vehicle_delay_index(world.vehicle(vi), net, world.clock());
    }
  }
  return sum / static_cast<double>(departed);
}

void evaluate_metrics(const SimWorld& world, EpisodeMetrics& metrics) {
  const double d = fleet_delay_index(world);
  metrics.served = world.served_count();
  metrics.samples.push_back(MetricsSample{world.clock(), world.served_count(), d});
  if (!metrics.terminated_at && d >= metrics.threshold) metrics.terminated_at = world.clock();
}

}  // namespace citylight
