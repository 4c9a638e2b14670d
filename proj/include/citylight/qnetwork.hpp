#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "citylight/rng.hpp"

namespace citylight {

inline constexpr int kNumActions = 8;

struct HeadOutput {
  std::array<double, kNumActions> q{};      // Q-values
  std::array<double, kNumActions> r_hat{};  // predicted immediate rewards
};

// Rectified-linear MLP with two linear heads of 8 outputs on the last
// hidden layer. Parameters live in one flat buffer: for each dense layer
// (hidden layers, then the Q head, then the reward head) a row-major
// out x in weight block followed by the out biases.
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(int input_dim, std::vector<int> hidden);  // all parameters zero

  // He-uniform weights, zero biases.
  static QNetwork initialized(int input_dim, std::vector<int> hidden, Rng& rng);

  int input_dim() const { return input_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }  // hidden + 2 heads

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  struct Dense {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    friend bool operator==(const Dense&, const Dense&) = default;
  };
  const Dense& layer(int l) const { return layers_.at(l); }
  double& weight(int l, int out, int in) { return params_[layers_[l].weight_offset + out * layers_[l].in + in]; }
  double& bias(int l, int out) { return params_[layers_[l].bias_offset + out]; }

  HeadOutput forward(std::span<const double> input) const;

  bool all_finite() const;

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

 private:
  int input_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Dense> layers_;
  std::vector<double> params_;
};

double huber(double err, double delta = 1.0);
double huber_grad(double err, double delta = 1.0);

// One supervised row of a training batch: Huber on Q[action] against
// `q_target` plus (weighted) Huber on r_hat[action] against `reward`.
struct TrainTarget {
  std::span<const double> state;
  int action = 0;
  double q_target = 0.0;
  double reward = 0.0;
};

struct LossParts {
  double q_loss = 0.0;  // batch mean
  double r_loss = 0.0;
  double total(double reward_weight = 1.0) const { return q_loss + reward_weight * r_loss; }
};

// Loss and its gradient w.r.t. every parameter (grad is overwritten).
// The parallel kernel accumulates fixed sample chunks on OpenMP threads
// and sums them in chunk order, so results do not depend on thread count.
LossParts loss_and_gradient(const QNetwork& net, std::span<const TrainTarget> batch, std::span<double> grad,
                            double reward_weight = 1.0);
LossParts loss_and_gradient_serial(const QNetwork& net, std::span<const TrainTarget> batch, std::span<double> grad,
                                   double reward_weight = 1.0);
LossParts batch_loss(const QNetwork& net, std::span<const TrainTarget> batch);

// Gradient descent with adaptive moment estimates.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
};

}  // namespace citylight
