#include "citylight/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace citylight {

std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Delay: return "delay";
    case RewardKind::Queue: return "queue";
    case RewardKind::DQ: return "dq";
    case RewardKind::MP: return "mp";
    case RewardKind::MPDQ: return "mp_dq";
    case RewardKind::TwinDQ: return "twin_dq";
  }
  return "?";
}

RewardKind parse_reward(std::string_view name) {
  for (RewardKind k : {RewardKind::Delay, RewardKind::Queue, RewardKind::DQ, RewardKind::MP, RewardKind::MPDQ,
                       RewardKind::TwinDQ}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown reward '" + std::string(name) + "'");
}

namespace {

double dq_sum(const ZoneStats& z, int first, int last) {
  double s = 0.0;
  for (int j = first; j < last; ++j) s += z.d[j] + z.q[j];
  return s;
}

}  // namespace

double reward_delay(const RewardSnapshot& s) {
  double sum = 0.0;
  for (double v : s.after.d) sum += v;
  return -sum;
}

double reward_queue(const RewardSnapshot& s) {
  double sum = 0.0;
  for (double v : s.after.q) sum += v;
  return -sum;
}

double reward_dq(const RewardSnapshot& s) { return -dq_sum(s.after, 0, kNumSlots); }

double reward_mp(const RewardSnapshot& s) {
  double up = 0.0, down = 0.0;
  for (int j = 0; j < kNumUpstreamSlots; ++j) up += s.after.x[j];
  for (int j = kNumUpstreamSlots; j < kNumSlots; ++j) down += s.after.x[j];
  return -std::abs(up - down);
}

double reward_mp_dq(const RewardSnapshot& s) {
  return -dq_sum(s.after, 0, kNumUpstreamSlots) + 0.5 * dq_sum(s.after, kNumUpstreamSlots, kNumSlots);
}

double reward_twin_dq(const RewardSnapshot& s, bool absolute_downstream) {
  if (!s.before) throw std::invalid_argument("reward_twin_dq: missing before-snapshot");
  const ZoneStats& b = *s.before;
  if (b.intersection != s.after.intersection || b.k != s.after.k) {
    throw std::invalid_argument("reward_twin_dq: snapshots differ in intersection or k");
  }
  const double change = dq_sum(s.after, kNumUpstreamSlots, kNumSlots) - dq_sum(b, kNumUpstreamSlots, kNumSlots);
  return -dq_sum(s.after, 0, kNumUpstreamSlots) - (absolute_downstream ? std::abs(change) : change);
}

double compute_reward(RewardKind kind, const RewardSnapshot& s, bool absolute_downstream) {
  switch (kind) {
    case RewardKind::Delay: return reward_delay(s);
    case RewardKind::Queue: return reward_queue(s);
    case RewardKind::DQ: return reward_dq(s);
    case RewardKind::MP: return reward_mp(s);
    case RewardKind::MPDQ: return reward_mp_dq(s);
    case RewardKind::TwinDQ: return reward_twin_dq(s, absolute_downstream);
  }
  throw std::invalid_argument("unknown reward kind");
}

}  // namespace citylight
