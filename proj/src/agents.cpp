#include "citylight/agents.hpp"

#include <stdexcept>

#include "citylight/features.hpp"

namespace citylight {

PhaseId FixedTimeAgent::decide(const DecisionContext& ctx) {
  const ControllerState& cs = ctx.controller;
  if (cs.green_elapsed < period_) return cs.current_phase;
  int p = cs.current_phase.index();
  for (int step = 0; step < 4; ++step) {
    p = p >= 3 ? 0 : p + 1;
    if (ctx.valid[p]) return PhaseId::from_index(p);
  }
  return cs.current_phase;
}

PhaseId MaxPressureAgent::decide(const DecisionContext& ctx) {
  const ZoneStats stats = zone_stats(ctx.world, ctx.intersection, k_);
  std::array<double, kNumPhases> pressure{};
  for (int p = 0; p < kNumPhases; ++p) pressure[p] = phase_pressure(stats, PhaseId::from_index(p), StatGroup::X);
  return PhaseId::from_index(masked_argmax(pressure, ctx.valid));
}

PhaseId RuleAgent::decide(const DecisionContext& ctx) {
  last_ = decide_rule(ctx.world, ctx.intersection, params_);
  return last_->phase;
}

DqnAgent::DqnAgent(std::vector<QNetwork> nets, bool hybrid, RuleParams params)
    : nets_(std::move(nets)), hybrid_(hybrid), params_(params) {
  if (nets_.empty()) throw std::invalid_argument("DqnAgent: at least one network required");
  for (const QNetwork& n : nets_) {
    if (n.input_dim() != kStateDim) throw std::invalid_argument("DqnAgent: network input must be 154-dimensional");
  }
}

std::string DqnAgent::name() const {
  if (hybrid_) return "dqn_hybrid";
  return nets_.size() == 1 ? "dqn_single" : "dqn_ensemble";
}

PhaseId DqnAgent::decide(const DecisionContext& ctx) {
  const StateVector s =
      build_state(ctx.world, ctx.intersection, ctx.controller.current_phase, ctx.controller.green_elapsed);
  std::optional<PhaseId> blocked;
  last_.reset();
  if (hybrid_) {
    const DensityView view = density_view(ctx.world, ctx.intersection, params_);
    if (auto d = layer1_blocked(view, params_, ctx.world.clock())) {
      last_ = *d;
      blocked = d->phase;
      ++overrides_;
    }
  }
  return hybrid_act(nets_, blocked, s, ctx.valid);
}

}  // namespace citylight
