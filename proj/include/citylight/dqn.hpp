#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "citylight/features.hpp"
#include "citylight/qnetwork.hpp"
#include "citylight/road_network.hpp"

namespace citylight {

struct TrainConfig {
  double gamma = 0.8;
  double lr = 1e-3;
  int model_update_freq = 1;    // gradient steps per decision step
  int target_update_freq = 17;  // model updates between hard target syncs
  double epsilon = 0.2;
  double epsilon_min = 0.01;
  double epsilon_decay = 0.995;  // per episode
  int green_sec = 20;
  int batch_size = 64;
  int replay_capacity = 65536;
  std::vector<int> hidden{128, 128};
  double reward_head_weight = 1.0;  // 0 detaches the reward head
  double reward_scale = 0.01;       // applied to rewards before they enter replay
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& doc);
std::uint64_t config_hash(const TrainConfig& cfg);

struct Experience {
  StateVector state{};
  int action = 0;  // phase index 0..7
  double reward = 0.0;
  StateVector next_state{};
  PhaseMask mask;  // valid actions at this intersection
  bool terminal = false;
};

// Fixed-capacity ring buffer, oldest entry evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Experience e);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& at(std::size_t i) const { return data_.at((head_ + i) % data_.size()); }  // 0 = oldest
  // Uniform with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next overwrite position once full
  std::vector<Experience> data_;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// argmax over valid actions, ties to the lowest index.
int masked_argmax(std::span<const double> values, const PhaseMask& mask);

// Double-DQN regression target for one transition.
double double_dqn_target(const QNetwork& online, const QNetwork& target, const Experience& e, double gamma);

struct TrainStepResult {
  double q_loss = 0.0;
  double r_loss = 0.0;
};

// One optimizer step on `batch` against frozen targets from `target`.
TrainStepResult train_step(QNetwork& online, const QNetwork& target, std::span<const Experience> batch,
                           const TrainConfig& cfg, Adam& adam);

// Hard copy every target_update_freq model updates; returns true on sync.
bool sync_target(const QNetwork& online, QNetwork& target, std::int64_t update_step, const TrainConfig& cfg);

PhaseId act(const QNetwork& net, const StateVector& s, const PhaseMask& mask, double epsilon, Rng& rng);
PhaseId ensemble_act(std::span<const QNetwork> nets, const StateVector& s, const PhaseMask& mask);
// Blocked-lane rule decision wins when present, otherwise the ensemble.
PhaseId hybrid_act(std::span<const QNetwork> nets, std::optional<PhaseId> blocked_lane_decision,
                   const StateVector& s, const PhaseMask& mask);

// Online/target pair with optimizer, replay and update counters.
class DqnLearner {
 public:
  explicit DqnLearner(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  ReplayBuffer& replay() { return replay_; }
  std::int64_t updates() const { return updates_; }
  double epsilon() const { return epsilon_; }
  Rng& rng() { return rng_; }

  void remember(Experience e) { replay_.push(std::move(e)); }
  // Samples a batch and trains if the buffer holds one; syncs the target on schedule.
  std::optional<TrainStepResult> update();
  void end_episode();

 private:
  TrainConfig cfg_;
  Rng rng_;
  QNetwork online_;
  QNetwork target_;
  Adam adam_;
  ReplayBuffer replay_;
  std::int64_t updates_ = 0;
  double epsilon_;
};

// Versioned binary: magic, version, layer shapes, row-major parameters, config hash.
void save_checkpoint(const QNetwork& net, std::uint64_t cfg_hash, const std::filesystem::path& path);
QNetwork load_checkpoint(const std::filesystem::path& path, std::uint64_t* cfg_hash = nullptr);

}  // namespace citylight
