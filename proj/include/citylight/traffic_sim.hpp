#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "citylight/road_network.hpp"

namespace citylight {

enum class VehicleStatus { Pending, Enroute, Queued, Served };

struct Vehicle {
  std::int64_t id = 0;
  std::vector<int> route;  // road indices
  std::vector<int> leg_freeflow;  // free-flow ticks per road on the route
  int leg = 0;             // index into route
  int lane = -1;           // current lane, -1 while pending
  double lane_pos = 0.0;   // meters from lane entry
  double speed = 0.0;
  int scheduled_time = 0;
  int depart_time = -1;
  int arrive_time = -1;
  int freeflow_trip_time = 0;
  VehicleStatus status = VehicleStatus::Pending;

  bool on_final_leg() const { return leg + 1 == static_cast<int>(route.size()); }
};

struct SimParams {
  double jam_spacing = kDefaultJamSpacing;
  int saturation_headway = 2;  // seconds between discharges from one lane
};

// Per-lane dynamic state. `vehicles` is ordered front (stop line) to back;
// the first `queued` entries are stopped in the FIFO queue.
struct LaneState {
  std::deque<int> vehicles;
  int queued = 0;
  int last_discharge = -1'000'000;
  int blocked_seconds = 0;
  bool discharged_this_tick = false;
};

// Point-queue traffic on a RoadNetwork, advanced in 1 s ticks.
class SimWorld {
 public:
  SimWorld(std::shared_ptr<const RoadNetwork> net, std::vector<FlowSpec> flows, SimParams params = {});

  // One second elapses. `permitted[i]` lists the upstream slots of
  // intersection i allowed to discharge this tick; right-turn slots and
  // unsignalized intersections are always allowed.
  void step(std::span<const SlotMask> permitted);

  const RoadNetwork& network() const { return *net_; }
  std::shared_ptr<const RoadNetwork> network_ptr() const { return net_; }
  const SimParams& params() const { return params_; }
  int clock() const { return clock_; }

  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const Vehicle& vehicle(int index) const { return vehicles_.at(index); }
  const LaneState& lane_state(int lane) const { return lanes_.at(lane); }
  int occupancy(int lane) const { return static_cast<int>(lanes_.at(lane).vehicles.size()); }

  std::int64_t served_count() const { return served_; }
  std::int64_t spawned_count() const { return spawned_; }
  std::int64_t pending_count() const { return pending_; }
  std::int64_t active_count() const { return spawned_ - served_ - pending_; }
  std::int64_t departed_count() const { return spawned_ - pending_; }

  // Sum of trip delay ratios over served vehicles.
  double served_ratio_sum() const { return served_ratio_sum_; }

 private:
  int entry_lane_for(const Vehicle& v, int leg) const;
  void enter_lane(int vi, int lane);
  void serve(int vi);

  std::shared_ptr<const RoadNetwork> net_;
  std::vector<FlowSpec> flows_;
  SimParams params_;
  int clock_ = 0;

  std::vector<Vehicle> vehicles_;
  std::vector<LaneState> lanes_;
  std::vector<std::deque<int>> pending_by_flow_;
  std::vector<std::vector<int>> schedule_;  // per flow, sorted spawn times
  std::vector<std::size_t> schedule_pos_;

  std::int64_t served_ = 0;
  std::int64_t spawned_ = 0;
  std::int64_t pending_ = 0;
  double served_ratio_sum_ = 0.0;
};

// Free-flow ticks to traverse `length` meters at `speed`.
int freeflow_ticks(double length, double speed);

// Trip-level delay index: (elapsed + remaining free-flow) / free-flow.
double vehicle_delay_index(const Vehicle& v, const RoadNetwork& net, int now);

inline constexpr double kDelayThreshold = 1.40;
inline constexpr int kMetricsPeriod = 20;

struct MetricsSample {
  int t = 0;
  std::int64_t served = 0;
  double delay_index = 1.0;
};

struct EpisodeMetrics {
  std::int64_t served = 0;
  std::vector<MetricsSample> samples;
  std::optional<int> terminated_at;
  double threshold = kDelayThreshold;
};

// Mean trip delay index over every departed vehicle; 1.0 when none departed.
double fleet_delay_index(const SimWorld& world);

// Appends a sample and sets termination when it reaches the threshold.
void evaluate_metrics(const SimWorld& world, EpisodeMetrics& metrics);

}  // namespace citylight
