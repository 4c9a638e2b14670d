#include "citylight/control.hpp"

#include <stdexcept>
#include <string>

namespace citylight {

std::string_view to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::TP1: return "tp1";
    case TriggerKind::TP2: return "tp2";
    case TriggerKind::TP3: return "tp3";
  }
  return "?";
}

TriggerKind parse_trigger(std::string_view name) {
  for (TriggerKind k : {TriggerKind::TP1, TriggerKind::TP2, TriggerKind::TP3}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown trigger policy '" + std::string(name) + "'");
}

bool condition_max_green(const ControllerState& cs, const TriggerPolicy& policy) {
  return cs.green_elapsed > policy.green_max;
}

bool condition_empty_upstream(const ControllerState& cs, const ZoneStats& stats60) {
  return phase_aggregate(stats60, cs.current_phase, StatGroup::Q) == 0.0;
}

bool condition_saturated_downstream(const ControllerState& cs, const ZoneStats& stats60,
                                    const TriggerPolicy& policy) {
  double down = 0.0;
  for (const auto& triple : phase_movements(cs.current_phase).downstream_groups) {
    for (int slot : triple) down += stats60.q[slot];
  }
  return policy.literal_downstream_equality ? down == policy.downstream_q_thresh
                                            : down >= policy.downstream_q_thresh;
}

bool condition_negative_pressure(const ControllerState& cs, const ZoneStats& stats60, const TriggerPolicy& policy) {
  return phase_pressure(stats60, cs.current_phase, StatGroup::Q) < policy.pressure_thresh;
}

bool should_trigger(const ControllerState& cs, const ZoneStats& stats60, const TriggerPolicy& policy) {
  if (stats60.k != policy.k_trigger) {
    throw std::invalid_argument("should_trigger: stats computed with k=" + std::to_string(stats60.k) +
                                ", policy expects k=" + std::to_string(policy.k_trigger));
  }
  if (condition_max_green(cs, policy)) return true;
  if (policy.kind == TriggerKind::TP1) return false;
  if (condition_empty_upstream(cs, stats60)) return true;
  if (policy.kind == TriggerKind::TP2) return false;
  return condition_saturated_downstream(cs, stats60, policy) || condition_negative_pressure(cs, stats60, policy);
}

ControllerState request_phase(const ControllerState& cs, PhaseId phase, const PhaseMask& valid) {
  if (cs.all_red_remaining > 0) throw std::logic_error("request_phase: all-red transition in progress");
  if (!valid[phase.index()]) {
    throw std::invalid_argument("request_phase: phase " + std::to_string(phase.value()) +
                                " has no existing upstream lane here");
  }
  if (phase == cs.current_phase) return cs;
  ControllerState next = cs;
  next.pending_phase = phase;
  next.all_red_remaining = kAllRedSeconds;
  return next;
}

ControllerState tick(const ControllerState& cs) {
  ControllerState next = cs;
  if (next.all_red_remaining > 0) {
    if (--next.all_red_remaining == 0) {
      next.current_phase = *next.pending_phase;
      next.pending_phase.reset();
      next.green_elapsed = 0;
    }
  } else {
    ++next.green_elapsed;
  }
  return next;
}

SlotMask permitted_slots(const ControllerState& cs) {
  SlotMask mask;
  for (int slot = 2; slot < kNumUpstreamSlots; slot += 3) mask.set(slot);
  if (cs.all_red_remaining == 0) {
    for (int slot : phase_movements(cs.current_phase).upstream_slots) mask.set(slot);
  }
  return mask;
}

PhaseId initial_phase(const PhaseMask& valid) {
  for (int p = 0; p < kNumPhases; ++p) {
    if (valid[p]) return PhaseId::from_index(p);
  }
  throw std::invalid_argument("intersection has no valid phase");
}

}  // namespace citylight
