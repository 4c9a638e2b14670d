#pragma once

#include <optional>
#include <string_view>

#include "citylight/features.hpp"
#include "citylight/road_network.hpp"

namespace citylight {

inline constexpr int kAllRedSeconds = 5;
inline constexpr int kActionPeriod = 10;

struct ControllerState {
  PhaseId current_phase{1};
  int green_elapsed = 0;
  int all_red_remaining = 0;
  std::optional<PhaseId> pending_phase;
};

enum class TriggerKind { TP1, TP2, TP3 };

std::string_view to_string(TriggerKind kind);
TriggerKind parse_trigger(std::string_view name);  // tp1|tp2|tp3

struct TriggerPolicy {
  TriggerKind kind = TriggerKind::TP3;
  int green_max = 30;
  double k_trigger = 60.0;
  double downstream_q_thresh = 8.0;
  double pressure_thresh = -5.0;
  // Condition 3 fires on q == threshold only, instead of q >= threshold.
  bool literal_downstream_equality = false;
};

// Individual conditions, exposed for tests and traces.
bool condition_max_green(const ControllerState& cs, const TriggerPolicy& policy);
bool condition_empty_upstream(const ControllerState& cs, const ZoneStats& stats60);
bool condition_saturated_downstream(const ControllerState& cs, const ZoneStats& stats60, const TriggerPolicy& policy);
bool condition_negative_pressure(const ControllerState& cs, const ZoneStats& stats60, const TriggerPolicy& policy);

// TP1 = {C1}, TP2 = {C1, C2}, TP3 = {C1, C2, C3, C4}.
bool should_trigger(const ControllerState& cs, const ZoneStats& stats60, const TriggerPolicy& policy);

// Starts the all-red transition unless `phase` is already active.
// Throws for phases with no existing upstream lane at this intersection.
ControllerState request_phase(const ControllerState& cs, PhaseId phase, const PhaseMask& valid);

ControllerState tick(const ControllerState& cs);

// Upstream slots allowed to discharge under this controller state.
SlotMask permitted_slots(const ControllerState& cs);

// First phase valid at the intersection, used as the initial green.
PhaseId initial_phase(const PhaseMask& valid);

}  // namespace citylight
