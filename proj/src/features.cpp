#include "citylight/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace citylight {

double vehicle_delay(double speed, double speed_limit) { return 1.0 - speed / speed_limit; }

int vehicle_queue_status(double speed) { return speed < kQueueSpeed ? 1 : 0; }

ZoneStats zone_stats(const SimWorld& world, int intersection, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("zone_stats: k must be > 0");
  const RoadNetwork& net = world.network();
  const Intersection& node = net.intersection(intersection);
  ZoneStats s;
  s.intersection = intersection;
  s.k = k;
  for (int slot = 0; slot < kNumSlots; ++slot) {
    const int li = node.lane_table[slot];
    if (li == kNoLane) continue;
    const Lane& lane = net.lane(li);
    const double reach = std::min(k, lane.length);
    const bool upstream = is_upstream_slot(slot);
    double count = 0.0, delay = 0.0, queue = 0.0;
    for (int vi : world.lane_state(li).vehicles) {
      const Vehicle& v = world.vehicle(vi);
      const double dist = upstream ? lane.length - v.lane_pos : v.lane_pos;
      if (dist >= reach) continue;
      count += 1.0;
      delay += vehicle_delay(v.speed, lane.speed_limit);
      queue += vehicle_queue_status(v.speed);
    }
    s.x[slot] = count;
    s.d[slot] = count > 0.0 ? delay / count : 0.0;
    s.q[slot] = queue;
  }
  return s;
}

namespace {

const std::array<double, kNumSlots>& group_values(const ZoneStats& stats, StatGroup group) {
  switch (group) {
    case StatGroup::X: return stats.x;
    case StatGroup::D: return stats.d;
    case StatGroup::Q: return stats.q;
  }
  throw std::invalid_argument("unknown stat group");
}

}  // namespace

double phase_aggregate(const ZoneStats& stats, PhaseId phase, StatGroup group) {
  const auto& v = group_values(stats, group);
  const auto& up = phase_movements(phase).upstream_slots;
  return v[up[0]] + v[up[1]];
}

double phase_pressure(const ZoneStats& stats, PhaseId phase, StatGroup group) {
  const auto& v = group_values(stats, group);
  const auto& m = phase_movements(phase);
  double down = 0.0;
  for (const auto& triple : m.downstream_groups) {
    for (int slot : triple) down += v[slot];
  }
  return v[m.upstream_slots[0]] + v[m.upstream_slots[1]] - down / 3.0;
}

StateVector build_state(const SimWorld& world, int intersection, PhaseId current_phase, int green_elapsed) {
  StateVector s{};
  constexpr StatGroup kGroups[3] = {StatGroup::X, StatGroup::D, StatGroup::Q};
  for (int ki = 0; ki < 3; ++ki) {
    const ZoneStats stats = zone_stats(world, intersection, kZoneDistances[ki]);
    for (int g = 0; g < 3; ++g) {
      for (int p = 0; p < kNumPhases; ++p) {
        const PhaseId phase = PhaseId::from_index(p);
        s[state_index(g, ki, p)] = phase_aggregate(stats, phase, kGroups[g]);
        s[state_index(g + 3, ki, p)] = phase_pressure(stats, phase, kGroups[g]);
      }
    }
  }
  s[kPhaseOneHotOffset + current_phase.index()] = 1.0;
  s[kTimeIndex] = world.clock() / kTimeNorm;
  s[kDurationIndex] = green_elapsed / kDurationNorm;
  return s;
}

std::vector<StateVector> build_states_serial(const SimWorld& world, std::span<const SignalView> signals) {
  const int n = static_cast<int>(world.network().intersections().size());
  if (static_cast<int>(signals.size()) != n) throw std::invalid_argument("build_states: one signal per intersection");
  std::vector<StateVector> out(n);
  for (int i = 0; i < n; ++i) out[i] = build_state(world, i, signals[i].phase, signals[i].green_elapsed);
  return out;
}

std::vector<StateVector> build_states(const SimWorld& world, std::span<const SignalView> signals) {
  const int n = static_cast<int>(world.network().intersections().size());
  if (static_cast<int>(signals.size()) != n) throw std::invalid_argument("build_states: one signal per intersection");
  std::vector<StateVector> out(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) out[i] = build_state(world, i, signals[i].phase, signals[i].green_elapsed);
  return out;
}

}  // namespace citylight
