#include "citylight/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace citylight {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainConfig: gamma must be in (0, 1)");
  if (!(epsilon_min <= epsilon)) throw std::invalid_argument("TrainConfig: epsilon_min must be <= epsilon");
  if (!(reward_scale > 0.0)) throw std::invalid_argument("TrainConfig: reward_scale must be > 0");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (batch_size < 1 || replay_capacity < batch_size) throw std::invalid_argument("TrainConfig: bad batch/replay size");
  if (model_update_freq < 1 || target_update_freq < 1) throw std::invalid_argument("TrainConfig: bad update freq");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw std::invalid_argument("TrainConfig: epsilon_decay must be in (0, 1]");
  if (green_sec < 1) throw std::invalid_argument("TrainConfig: green_sec must be >= 1");
  if (hidden.empty() || std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; })) {
    throw std::invalid_argument("TrainConfig: hidden layer sizes must be >= 1");
  }
}

json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"lr", c.lr},
          {"model_update_freq", c.model_update_freq},
          {"target_update_freq", c.target_update_freq},
          {"epsilon", c.epsilon},
          {"epsilon_min", c.epsilon_min},
          {"epsilon_decay", c.epsilon_decay},
          {"green_sec", c.green_sec},
          {"batch_size", c.batch_size},
          {"replay_capacity", c.replay_capacity},
          {"hidden", c.hidden},
          {"reward_head_weight", c.reward_head_weight},
          {"reward_scale", c.reward_scale},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& doc) {
  static constexpr const char* kKeys[] = {"gamma",         "lr",           "model_update_freq", "target_update_freq",
                                          "epsilon",       "epsilon_min",  "epsilon_decay",     "green_sec",
                                          "batch_size",    "replay_capacity", "hidden",         "reward_head_weight",
                                          "reward_scale",  "seed"};
  if (!doc.is_object()) throw ValidationError("train config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ValidationError("unknown train config key '" + key + "'");
    }
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("train config key '") + key + "': " + e.what());
    }
  };
  get("gamma", c.gamma);
  get("lr", c.lr);
  get("model_update_freq", c.model_update_freq);
  get("target_update_freq", c.target_update_freq);
  get("epsilon", c.epsilon);
  get("epsilon_min", c.epsilon_min);
  get("epsilon_decay", c.epsilon_decay);
  get("green_sec", c.green_sec);
  get("batch_size", c.batch_size);
  get("replay_capacity", c.replay_capacity);
  get("hidden", c.hidden);
  get("reward_head_weight", c.reward_head_weight);
  get("reward_scale", c.reward_scale);
  get("seed", c.seed);
  c.validate();
  return c;
}

std::uint64_t config_hash(const TrainConfig& cfg) { return fnv1a64(to_json(cfg).dump()); }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
}

void ReplayBuffer::push(Experience e) {
  if (!e.mask[e.action]) throw std::invalid_argument("ReplayBuffer: action invalid under its own mask");
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
    return;
  }
  data_[head_] = std::move(e);
  head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = static_cast<std::size_t>(uniform_index(rng, static_cast<int>(data_.size())));
  return out;
}

int masked_argmax(std::span<const double> values, const PhaseMask& mask) {
  int best = -1;
  for (int a = 0; a < static_cast<int>(values.size()); ++a) {
    if (!mask[a]) continue;
    if (best < 0 || values[a] > values[best]) best = a;
  }
  if (best < 0) throw std::invalid_argument("masked_argmax: no valid action");
  return best;
}

double double_dqn_target(const QNetwork& online, const QNetwork& target, const Experience& e, double gamma) {
  if (e.terminal) return e.reward;
  const HeadOutput next_online = online.forward(e.next_state);
  const int a_star = masked_argmax(next_online.q, e.mask);
  return e.reward + gamma * target.forward(e.next_state).q[a_star];
}

TrainStepResult train_step(QNetwork& online, const QNetwork& target, std::span<const Experience> batch,
                           const TrainConfig& cfg, Adam& adam) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  std::vector<TrainTarget> rows;
  rows.reserve(batch.size());
  for (const Experience& e : batch) {
    rows.push_back(TrainTarget{e.state, e.action, double_dqn_target(online, target, e, cfg.gamma), e.reward});
  }
  std::vector<double> grad(online.params().size());
  const LossParts loss = loss_and_gradient(online, rows, grad, cfg.reward_head_weight);
  if (!std::isfinite(loss.q_loss) || !std::isfinite(loss.r_loss)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss (q_loss=" << loss.q_loss << ", r_loss=" << loss.r_loss
        << ", batch=" << batch.size() << ", adam_step=" << adam.steps() << ")";
    throw NonFiniteLoss(msg.str());
  }
  adam.step(online.params(), grad, cfg.lr);
  if (!online.all_finite()) throw NonFiniteLoss("train_step: parameters became non-finite");
  return {loss.q_loss, loss.r_loss};
}

bool sync_target(const QNetwork& online, QNetwork& target, std::int64_t update_step, const TrainConfig& cfg) {
  if (update_step <= 0 || update_step % cfg.target_update_freq != 0) return false;
  target = online;
  return true;
}

PhaseId act(const QNetwork& net, const StateVector& s, const PhaseMask& mask, double epsilon, Rng& rng) {
  if (mask.none()) throw std::invalid_argument("act: empty action mask");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    int pick = uniform_index(rng, static_cast<int>(mask.count()));
    for (int a = 0; a < kNumActions; ++a) {
      if (mask[a] && pick-- == 0) return PhaseId::from_index(a);
    }
  }
  return PhaseId::from_index(masked_argmax(net.forward(s).q, mask));
}

PhaseId ensemble_act(std::span<const QNetwork> nets, const StateVector& s, const PhaseMask& mask) {
  if (nets.empty()) throw std::invalid_argument("ensemble_act: no models");
  std::array<double, kNumActions> mean{};
  for (const QNetwork& net : nets) {
    const HeadOutput out = net.forward(s);
    for (int a = 0; a < kNumActions; ++a) mean[a] += out.q[a];
  }
  for (double& m : mean) m /= static_cast<double>(nets.size());
  return PhaseId::from_index(masked_argmax(mean, mask));
}

PhaseId hybrid_act(std::span<const QNetwork> nets, std::optional<PhaseId> blocked_lane_decision,
                   const StateVector& s, const PhaseMask& mask) {
  if (blocked_lane_decision && mask[blocked_lane_decision->index()]) return *blocked_lane_decision;
  return ensemble_act(nets, s, mask);
}

DqnLearner::DqnLearner(TrainConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      rng_(make_rng(cfg_.seed, "agent")),
      replay_(static_cast<std::size_t>(cfg_.replay_capacity)),
      epsilon_(cfg_.epsilon) {
  Rng init = make_rng(cfg_.seed, "init");
  online_ = QNetwork::initialized(kStateDim, cfg_.hidden, init);
  target_ = online_;
  adam_ = Adam(online_.params().size());
}

std::optional<TrainStepResult> DqnLearner::update() {
  if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size)) return std::nullopt;
  TrainStepResult last;
  for (int k = 0; k < cfg_.model_update_freq; ++k) {
    std::vector<Experience> batch;
    batch.reserve(cfg_.batch_size);
    for (std::size_t i : replay_.sample_indices(cfg_.batch_size, rng_)) batch.push_back(replay_.at(i));
    last = train_step(online_, target_, batch, cfg_, adam_);
    ++updates_;
    sync_target(online_, target_, updates_, cfg_);
  }
  return last;
}

void DqnLearner::end_episode() { epsilon_ = std::max(cfg_.epsilon_min, epsilon_ * cfg_.epsilon_decay); }

namespace {

constexpr char kMagic[4] = {'C', 'L', 'Q', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("checkpoint '" + path.string() + "' is truncated");
  }
  return v;
}

}  // namespace

void save_checkpoint(const QNetwork& net, std::uint64_t cfg_hash, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden().size()));
  for (int h : net.hidden()) put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put<std::uint32_t>(out, kNumActions);
  put<std::uint64_t>(out, net.params().size());
  for (double p : net.params()) put<double>(out, p);
  put<std::uint64_t>(out, cfg_hash);
}

QNetwork load_checkpoint(const std::filesystem::path& path, std::uint64_t* cfg_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = take<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto input_dim = take<std::uint32_t>(in, path);
  const auto n_hidden = take<std::uint32_t>(in, path);
  if (n_hidden > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<int> hidden;
  for (std::uint32_t i = 0; i < n_hidden; ++i) hidden.push_back(static_cast<int>(take<std::uint32_t>(in, path)));
  if (take<std::uint32_t>(in, path) != kNumActions) throw std::runtime_error("checkpoint: head width mismatch");
  QNetwork net(static_cast<int>(input_dim), hidden);
  if (take<std::uint64_t>(in, path) != net.params().size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (double& p : net.params()) p = take<double>(in, path);
  const auto hash = take<std::uint64_t>(in, path);
  if (cfg_hash) *cfg_hash = hash;
  return net;
}

}  // namespace citylight
