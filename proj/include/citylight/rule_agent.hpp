#pragma once

#include <array>
#include <optional>

#include "citylight/road_network.hpp"
#include "citylight/traffic_sim.hpp"

namespace citylight {

struct RuleParams {
  double k_up = 100.0;
  double mu = 0.5;
  double c_block_start = 200.0;
  double c_block_end = 300.0;
  std::array<double, 5> c_balance_start{0.15, 0.2, 0.2, 0.2, 0.25};
  std::array<double, 5> c_balance_end{0.13, 0.18, 0.18, 0.18, 0.23};
  // Both schedules move linearly from start to end over this window.
  double schedule_seconds = 1800.0;
  double c_speed = 1.0;

  double c_block(int now) const;
  double c_balance(int round, int now) const;  // round in 0..4
};

// Per-intersection density snapshot over the 12 upstream slots.
struct DensityView {
  std::array<bool, kNumUpstreamSlots> exists{};
  std::array<double, kNumUpstreamSlots> alpha_up{};
  std::array<double, kNumUpstreamSlots> alpha_down{};  // of the downstream lane fed by each slot
  std::array<double, kNumUpstreamSlots> alpha_rel{};
  std::array<int, kNumUpstreamSlots> order{};        // 1 = highest alpha_rel
  std::array<int, kNumUpstreamSlots> blocked_seconds{};
  std::array<double, kNumUpstreamSlots> avg_speed{};
  std::array<int, kNumUpstreamSlots> speed_order{};  // 1 = slowest
};

// Downstream lane paired with an upstream slot: the middle lane of its target triple.
constexpr int paired_downstream_slot(int upstream_slot) { return downstream_group_start(upstream_slot) + 1; }

// Recomputes `order` and `speed_order` from alpha_rel / avg_speed / exists.
// Ties go to the lower slot; missing slots rank last.
void rank_view(DensityView& view);

DensityView density_view(const SimWorld& world, int intersection, const RuleParams& params);

struct RuleDecision {
  PhaseId phase{1};
  int layer = 4;
  int round = 1;
};

std::optional<RuleDecision> layer1_blocked(const DensityView& view, const RuleParams& params, int now);
std::optional<RuleDecision> layer2_balanced(const DensityView& view, const RuleParams& params, int now);
std::optional<RuleDecision> layer3_slow(const DensityView& view, const RuleParams& params);
RuleDecision layer4_fallback(const DensityView& view);

// First layer that returns a phase.
RuleDecision decide_rule(const DensityView& view, const RuleParams& params, int now);
RuleDecision decide_rule(const SimWorld& world, int intersection, const RuleParams& params);

}  // namespace citylight
