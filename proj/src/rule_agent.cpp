#include "citylight/rule_agent.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace citylight {

namespace {

double ramp(int now, double window) { return window > 0 ? std::clamp(now / window, 0.0, 1.0) : 1.0; }

// Phase seen from one of its slots: (this slot, partner slot).
struct PairView {
  PhaseId phase;
  int dominant;
  int other;
};

PairView as_pair(PhaseId phase, const DensityView& v) {
  const auto& up = phase_movements(phase).upstream_slots;
  const bool first = v.order[up[0]] <= v.order[up[1]];
  return {phase, first ? up[0] : up[1], first ? up[1] : up[0]};
}

int partner_of(PhaseId phase, int slot) {
  const auto& up = phase_movements(phase).upstream_slots;
  return up[0] == slot ? up[1] : up[0];
}

bool both_exist(PhaseId phase, const DensityView& v) {
  const auto& up = phase_movements(phase).upstream_slots;
  return v.exists[up[0]] && v.exists[up[1]];
}

bool balanced(double a, double b, double c_balance) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi < lo / c_balance;
}

// Lower order sum wins, then the lower phase id.
void keep_best(std::optional<RuleDecision>& best, int& best_score, PhaseId phase, int score, int layer, int round) {
  if (!best || score < best_score) {
    best = RuleDecision{phase, layer, round};
    best_score = score;
  }
}

}  // namespace

double RuleParams::c_block(int now) const {
  return c_block_start + (c_block_end - c_block_start) * ramp(now, schedule_seconds);
}

double RuleParams::c_balance(int round, int now) const {
  return c_balance_start.at(round) + (c_balance_end.at(round) - c_balance_start.at(round)) * ramp(now, schedule_seconds);
}

void rank_view(DensityView& view) {
  std::array<int, kNumUpstreamSlots> idx;
  std::iota(idx.begin(), idx.end(), 0);
  auto rank_by = [&](auto better, std::array<int, kNumUpstreamSlots>& out) {
    std::array<int, kNumUpstreamSlots> sorted = idx;
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
      if (view.exists[a] != view.exists[b]) return view.exists[a];
      if (!view.exists[a]) return false;
      return better(a, b);
    });
    for (int r = 0; r < kNumUpstreamSlots; ++r) out[sorted[r]] = r + 1;
  };
  rank_by([&](int a, int b) { return view.alpha_rel[a] > view.alpha_rel[b]; }, view.order);
  rank_by([&](int a, int b) { return view.avg_speed[a] < view.avg_speed[b]; }, view.speed_order);
}

DensityView density_view(const SimWorld& world, int intersection, const RuleParams& params) {
  const RoadNetwork& net = world.network();
  const Intersection& node = net.intersection(intersection);
  DensityView v;
  for (int slot = 0; slot < kNumUpstreamSlots; ++slot) {
    const int li = node.lane_table[slot];
    v.exists[slot] = li != kNoLane;
    if (li == kNoLane) {
      v.alpha_rel[slot] = -std::numeric_limits<double>::infinity();
      v.avg_speed[slot] = std::numeric_limits<double>::infinity();
      continue;
    }
    const Lane& lane = net.lane(li);
    const LaneState& ls = world.lane_state(li);
    const double reach = std::min(params.k_up, lane.length);
    int count = 0;
    double speed_sum = 0.0;
    for (int vi : ls.vehicles) {
      const Vehicle& veh = world.vehicle(vi);
      if (lane.length - veh.lane_pos < reach) {
        ++count;
        speed_sum += veh.speed;
      }
    }
    v.alpha_up[slot] = count / params.k_up;
    v.avg_speed[slot] = count > 0 ? speed_sum / count : lane.speed_limit;
    v.blocked_seconds[slot] = ls.blocked_seconds;

    const int down_lane = node.lane_table[paired_downstream_slot(slot)];
    if (down_lane != kNoLane) {
      const Lane& dl = net.lane(down_lane);
      const double span = dl.length - params.k_up;
      if (span > 0.0) {
        int n = 0;
        for (int vi : world.lane_state(down_lane).vehicles) n += world.vehicle(vi).lane_pos < span;
        v.alpha_down[slot] = n / span;
      }
    }
    v.alpha_rel[slot] = v.alpha_up[slot] - params.mu * v.alpha_down[slot];
  }
  rank_view(v);
  return v;
}

std::optional<RuleDecision> layer1_blocked(const DensityView& view, const RuleParams& params, int now) {
  std::vector<int> lanes;
  for (int slot = 0; slot < kNumUpstreamSlots; ++slot) {
    if (view.exists[slot] && !is_right_turn_slot(slot)) lanes.push_back(slot);
  }
  std::stable_sort(lanes.begin(), lanes.end(),
                   [&](int a, int b) { return view.blocked_seconds[a] > view.blocked_seconds[b]; });

  struct Round {
    double threshold;
    int max_dominant;
    int max_other;
    bool other_exact;
  };
  const Round rounds[2] = {{params.c_block(now), 5, 4, false}, {params.c_block(now) + 50.0, 2, 1, true}};
  for (int r = 0; r < 2 && r < static_cast<int>(lanes.size()); ++r) {
    const int lane = lanes[r];
    if (!(view.blocked_seconds[lane] > rounds[r].threshold)) continue;
    std::optional<RuleDecision> pick;
    for (PhaseId phase : phases_with_slot(lane)) {
      const int other = partner_of(phase, lane);
      const bool other_ok = rounds[r].other_exact ? view.order[other] == rounds[r].max_other
                                                  : view.order[other] <= rounds[r].max_other;
      if (!view.exists[other] || view.order[lane] > rounds[r].max_dominant || !other_ok) continue;
      if (!pick || (phase_movements(phase).serves_two_roads && !phase_movements(pick->phase).serves_two_roads)) {
        pick = RuleDecision{phase, 1, r + 1};
      }
    }
    if (pick) return pick;
  }
  return std::nullopt;
}

std::optional<RuleDecision> layer2_balanced(const DensityView& view, const RuleParams& params, int now) {
  const int anchor = static_cast<int>(std::find(view.order.begin(), view.order.end(), 1) - view.order.begin());
  if (anchor < kNumUpstreamSlots && view.exists[anchor]) {
    for (int r = 0; r < 4; ++r) {
      const double c = params.c_balance(r, now);
      std::optional<RuleDecision> best;
      int best_score = 0;
      for (PhaseId phase : phases_with_slot(anchor)) {
        const int other = partner_of(phase, anchor);
        if (!view.exists[other] || view.order[other] > r + 2) continue;
        if (!balanced(view.alpha_rel[anchor], view.alpha_rel[other], c)) continue;
        keep_best(best, best_score, phase, view.order[other], 2, r + 1);
      }
      if (best) return best;
    }
  }
  const double c = params.c_balance(4, now);
  std::optional<RuleDecision> best;
  int best_score = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    const PhaseId phase = PhaseId::from_index(p);
    if (!both_exist(phase, view)) continue;
    const PairView pv = as_pair(phase, view);
    if (view.order[pv.dominant] > 2 || view.order[pv.other] > 3) continue;
    if (!balanced(view.alpha_rel[pv.dominant], view.alpha_rel[pv.other], c)) continue;
    keep_best(best, best_score, phase, view.order[pv.dominant] + view.order[pv.other], 2, 5);
  }
  return best;
}

std::optional<RuleDecision> layer3_slow(const DensityView& view, const RuleParams& params) {
  const int limits[2][2] = {{2, 4}, {3, 5}};  // (speed rank, density rank) per round
  for (int r = 0; r < 2; ++r) {
    std::optional<RuleDecision> best;
    int best_score = 0;
    for (int p = 0; p < kNumPhases; ++p) {
      const PhaseId phase = PhaseId::from_index(p);
      if (!both_exist(phase, view)) continue;
      const auto& up = phase_movements(phase).upstream_slots;
      bool ok = true;
      for (int slot : up) {
        ok = ok && view.avg_speed[slot] < params.c_speed && view.speed_order[slot] <= limits[r][0] &&
             view.order[slot] <= limits[r][1];
      }
      if (ok) keep_best(best, best_score, phase, view.order[up[0]] + view.order[up[1]], 3, r + 1);
    }
    if (best) return best;
  }
  return std::nullopt;
}

RuleDecision layer4_fallback(const DensityView& view) {
  std::array<int, kNumUpstreamSlots> by_order;
  for (int slot = 0; slot < kNumUpstreamSlots; ++slot) by_order[view.order[slot] - 1] = slot;
  int round = 1;
  for (int slot : by_order) {
    if (!view.exists[slot]) break;  // missing slots rank last
    if (is_right_turn_slot(slot)) {
      round = 2;
      continue;
    }
    const auto phases = phases_with_slot(slot);  // two-road phase first
    for (PhaseId phase : phases) {
      if (!phase_movements(phase).serves_two_roads || view.exists[partner_of(phase, slot)]) {
        return RuleDecision{phase, 4, round};
      }
    }
  }
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& up = phase_movements(PhaseId::from_index(p)).upstream_slots;
    if (view.exists[up[0]] || view.exists[up[1]]) return RuleDecision{PhaseId::from_index(p), 4, round};
  }
  return RuleDecision{PhaseId(1), 4, round};
}

RuleDecision decide_rule(const DensityView& view, const RuleParams& params, int now) {
  if (auto d = layer1_blocked(view, params, now)) return *d;
  if (auto d = layer2_balanced(view, params, now)) return *d;
  if (auto d = layer3_slow(view, params)) return *d;
  return layer4_fallback(view);
}

RuleDecision decide_rule(const SimWorld& world, int intersection, const RuleParams& params) {
  return decide_rule(density_view(world, intersection, params), params, world.clock());
}

}  // namespace citylight
