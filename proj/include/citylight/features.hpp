#pragma once

#include <array>
#include <span>
#include <vector>

#include "citylight/road_network.hpp"
#include "citylight/traffic_sim.hpp"

namespace citylight {

inline constexpr double kQueueSpeed = 0.3;  // m/s
inline constexpr std::array<double, 3> kZoneDistances = {60.0, 100.0, 200.0};
inline constexpr int kNumFeatureGroups = 6;
inline constexpr int kStatDims = kNumFeatureGroups * 3 * kNumPhases;  // 144
inline constexpr int kStateDim = kStatDims + kNumPhases + 2;          // 154
inline constexpr double kTimeNorm = 3600.0;
inline constexpr double kDurationNorm = 30.0;

// 1 - speed / speed_limit
double vehicle_delay(double speed, double speed_limit);
int vehicle_queue_status(double speed);

struct ZoneStats {
  int intersection = -1;
  double k = 0.0;
  std::array<double, kNumSlots> x{};  // vehicle count
  std::array<double, kNumSlots> d{};  // mean of per-vehicle delay, 0 when empty
  std::array<double, kNumSlots> q{};  // queued vehicle count
};

enum class StatGroup { X, D, Q };

// Zone of influence: the part of each lane closer than min(k, lane length)
// to the intersection. Upstream lanes measure from their stop line,
// downstream lanes from their entry.
ZoneStats zone_stats(const SimWorld& world, int intersection, double k);

// Sum over the phase's two upstream slots.
double phase_aggregate(const ZoneStats& stats, PhaseId phase, StatGroup group);

// Upstream sum minus a third of the six downstream slots.
double phase_pressure(const ZoneStats& stats, PhaseId phase, StatGroup group);

// Layout of the 144 statistic entries: group-major (x, d, q aggregates,
// then x, d, q pressures), then k in {60, 100, 200}, then phase 1..8.
// Followed by the current-phase one-hot, clock / 3600 and green / 30.
constexpr int state_index(int feature_group, int k_index, int phase_index) {
  return (feature_group * 3 + k_index) * kNumPhases + phase_index;
}
inline constexpr int kPhaseOneHotOffset = kStatDims;
inline constexpr int kTimeIndex = kStatDims + kNumPhases;
inline constexpr int kDurationIndex = kTimeIndex + 1;

using StateVector = std::array<double, kStateDim>;

StateVector build_state(const SimWorld& world, int intersection, PhaseId current_phase, int green_elapsed);

struct SignalView {
  PhaseId phase{1};
  int green_elapsed = 0;
};

// State vectors for every intersection. The parallel kernel splits the
// intersections across OpenMP threads; the serial one is the reference.
std::vector<StateVector> build_states(const SimWorld& world, std::span<const SignalView> signals);
std::vector<StateVector> build_states_serial(const SimWorld& world, std::span<const SignalView> signals);

}  // namespace citylight
