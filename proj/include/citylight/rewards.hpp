#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "citylight/features.hpp"

namespace citylight {

inline constexpr double kRewardDistance = 100.0;

enum class RewardKind { Delay, Queue, DQ, MP, MPDQ, TwinDQ };

std::string_view to_string(RewardKind kind);
RewardKind parse_reward(std::string_view name);  // delay|queue|dq|mp|mp_dq|twin_dq

// Zone statistics at two consecutive decision boundaries of one
// intersection. `before` is only needed by Twin-DQ.
struct RewardSnapshot {
  std::optional<ZoneStats> before;
  ZoneStats after;
};

double reward_delay(const RewardSnapshot& s);
double reward_queue(const RewardSnapshot& s);
double reward_dq(const RewardSnapshot& s);
// Negated magnitude |upstream x - downstream x| so larger is better.
double reward_mp(const RewardSnapshot& s);
double reward_mp_dq(const RewardSnapshot& s);

// Upstream DQ penalty plus the change of downstream DQ since `before`.
// With `absolute_downstream` the change is penalized in both directions.
double reward_twin_dq(const RewardSnapshot& s, bool absolute_downstream = false);

double compute_reward(RewardKind kind, const RewardSnapshot& s, bool absolute_downstream = false);

}  // namespace citylight
