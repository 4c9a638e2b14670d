#include "citylight/qnetwork.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace citylight {

QNetwork::QNetwork(int input_dim, std::vector<int> hidden) : input_dim_(input_dim), hidden_(std::move(hidden)) {
  if (input_dim_ < 1) throw std::invalid_argument("QNetwork: input_dim must be >= 1");
  std::size_t offset = 0;
  int prev = input_dim_;
  auto add = [&](int out) {
    if (out < 1) throw std::invalid_argument("QNetwork: layer width must be >= 1");
    Dense d{prev, out, offset, offset + static_cast<std::size_t>(prev) * out};
    offset = d.bias_offset + out;
    layers_.push_back(d);
  };
  for (int h : hidden_) {
    add(h);
    prev = h;
  }
  add(kNumActions);
  add(kNumActions);  // reward head reads the same features as the Q head
  params_.assign(offset, 0.0);
}

QNetwork QNetwork::initialized(int input_dim, std::vector<int> hidden, Rng& rng) {
  QNetwork net(input_dim, std::move(hidden));
  for (const Dense& d : net.layers_) {
    const double bound = std::sqrt(6.0 / d.in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.in) * d.out; ++i) {
      net.params_[d.weight_offset + i] = (2.0 * uniform01(rng) - 1.0) * bound;
    }
  }
  return net;
}

bool QNetwork::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
}

namespace {

// y = W x + b for one dense layer.
inline void affine(const double* params, const QNetwork::Dense& d, const double* x, double* y) {
  const double* w = params + d.weight_offset;
  const double* b = params + d.bias_offset;
  for (int o = 0; o < d.out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * d.in;
    double acc = b[o];
    for (int i = 0; i < d.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

struct Workspace {
  std::vector<std::vector<double>> act;  // post-activation of each hidden layer
  std::vector<std::vector<double>> delta;

  explicit Workspace(const QNetwork& net) {
    for (int h : net.hidden()) {
      act.emplace_back(h);
      delta.emplace_back(h);
    }
  }
};

void forward_cached(const QNetwork& net, const double* input, Workspace& ws, HeadOutput& out) {
  const double* p = net.params().data();
  const int n_hidden = static_cast<int>(net.hidden().size());
  const double* x = input;
  for (int l = 0; l < n_hidden; ++l) {
    double* y = ws.act[l].data();
    affine(p, net.layer(l), x, y);
    for (int o = 0; o < net.layer(l).out; ++o) y[o] = std::max(0.0, y[o]);
    x = y;
  }
  affine(p, net.layer(n_hidden), x, out.q.data());
  affine(p, net.layer(n_hidden + 1), x, out.r_hat.data());
}

void check_sample(const QNetwork& net, const TrainTarget& t) {
  if (static_cast<int>(t.state.size()) != net.input_dim()) throw std::invalid_argument("state dimension mismatch");
  if (t.action < 0 || t.action >= kNumActions) throw std::invalid_argument("action out of range");
}

// Adds the scaled gradient of one sample into `grad`; returns (q, r) Huber terms.
std::pair<double, double> accumulate_sample(const QNetwork& net, const TrainTarget& t, double scale,
                                            double reward_weight, Workspace& ws, double* grad) {
  HeadOutput out;
  forward_cached(net, t.state.data(), ws, out);
  const double q_err = out.q[t.action] - t.q_target;
  const double r_err = out.r_hat[t.action] - t.reward;
  const double dq = huber_grad(q_err) * scale;
  const double dr = huber_grad(r_err) * scale * reward_weight;

  const double* p = net.params().data();
  const int n_hidden = static_cast<int>(net.hidden().size());
  const QNetwork::Dense& qh = net.layer(n_hidden);
  const QNetwork::Dense& rh = net.layer(n_hidden + 1);
  const double* feat = n_hidden > 0 ? ws.act[n_hidden - 1].data() : t.state.data();

  double* gq = grad + qh.weight_offset + static_cast<std::size_t>(t.action) * qh.in;
  double* gr = grad + rh.weight_offset + static_cast<std::size_t>(t.action) * rh.in;
  for (int i = 0; i < qh.in; ++i) {
    gq[i] += dq * feat[i];
    gr[i] += dr * feat[i];
  }
  grad[qh.bias_offset + t.action] += dq;
  grad[rh.bias_offset + t.action] += dr;

  if (n_hidden > 0) {
    const double* wq = p + qh.weight_offset + static_cast<std::size_t>(t.action) * qh.in;
    const double* wr = p + rh.weight_offset + static_cast<std::size_t>(t.action) * rh.in;
    std::vector<double>& top = ws.delta[n_hidden - 1];
    for (int i = 0; i < qh.in; ++i) top[i] = wq[i] * dq + wr[i] * dr;

    for (int l = n_hidden - 1; l >= 0; --l) {
      const QNetwork::Dense& d = net.layer(l);
      std::vector<double>& delta = ws.delta[l];
      const std::vector<double>& a = ws.act[l];
      for (int o = 0; o < d.out; ++o) {
        if (a[o] <= 0.0) delta[o] = 0.0;
      }
      const double* x = l > 0 ? ws.act[l - 1].data() : t.state.data();
      double* gw = grad + d.weight_offset;
      for (int o = 0; o < d.out; ++o) {
        const double g = delta[o];
        if (g == 0.0) continue;
        double* row = gw + static_cast<std::size_t>(o) * d.in;
        for (int i = 0; i < d.in; ++i) row[i] += g * x[i];
        grad[d.bias_offset + o] += g;
      }
      if (l > 0) {
        std::vector<double>& below = ws.delta[l - 1];
        std::fill(below.begin(), below.end(), 0.0);
        const double* w = p + d.weight_offset;
        for (int o = 0; o < d.out; ++o) {
          const double g = delta[o];
          if (g == 0.0) continue;
          const double* row = w + static_cast<std::size_t>(o) * d.in;
          for (int i = 0; i < d.in; ++i) below[i] += g * row[i];
        }
      }
    }
  }
  return {huber(q_err), huber(r_err)};
}

constexpr int kGradChunks = 8;

}  // namespace

HeadOutput QNetwork::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim_) {
    throw std::invalid_argument("QNetwork::forward: expected " + std::to_string(input_dim_) + " inputs, got " +
                                std::to_string(input.size()));
  }
  Workspace ws(*this);
  HeadOutput out;
  forward_cached(*this, input.data(), ws, out);
  return out;
}

double huber(double err, double delta) {
  const double a = std::abs(err);
  return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

double huber_grad(double err, double delta) { return std::clamp(err, -delta, delta); }

LossParts loss_and_gradient_serial(const QNetwork& net, std::span<const TrainTarget> batch, std::span<double> grad,
                                   double reward_weight) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (grad.size() != net.params().size()) throw std::invalid_argument("gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  Workspace ws(net);
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossParts loss;
  for (const TrainTarget& t : batch) {
    check_sample(net, t);
    auto [lq, lr] = accumulate_sample(net, t, scale, reward_weight, ws, grad.data());
    loss.q_loss += lq;
    loss.r_loss += lr;
  }
  loss.q_loss *= scale;
  loss.r_loss *= scale;
  return loss;
}

LossParts loss_and_gradient(const QNetwork& net, std::span<const TrainTarget> batch, std::span<double> grad,
                            double reward_weight) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (grad.size() != net.params().size()) throw std::invalid_argument("gradient buffer size mismatch");
  for (const TrainTarget& t : batch) check_sample(net, t);
  const std::size_t n = batch.size();
  const std::size_t np = grad.size();
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<double> partial(static_cast<std::size_t>(kGradChunks) * np, 0.0);
  std::array<double, kGradChunks> q_part{}, r_part{};

#pragma omp parallel for schedule(static)
  for (int c = 0; c < kGradChunks; ++c) {
    Workspace ws(net);
    const std::size_t begin = n * c / kGradChunks;
    const std::size_t end = n * (c + 1) / kGradChunks;
    double* g = partial.data() + static_cast<std::size_t>(c) * np;
    for (std::size_t s = begin; s < end; ++s) {
      auto [lq, lr] = accumulate_sample(net, batch[s], scale, reward_weight, ws, g);
      q_part[c] += lq;
      r_part[c] += lr;
    }
  }

  LossParts loss;
  std::copy(partial.begin(), partial.begin() + static_cast<std::ptrdiff_t>(np), grad.begin());
  for (int c = 1; c < kGradChunks; ++c) {
    const double* g = partial.data() + static_cast<std::size_t>(c) * np;
    for (std::size_t i = 0; i < np; ++i) grad[i] += g[i];
  }
  for (int c = 0; c < kGradChunks; ++c) {
    loss.q_loss += q_part[c];
    loss.r_loss += r_part[c];
  }
  loss.q_loss *= scale;
  loss.r_loss *= scale;
  return loss;
}

LossParts batch_loss(const QNetwork& net, std::span<const TrainTarget> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  LossParts loss;
  for (const TrainTarget& t : batch) {
    check_sample(net, t);
    const HeadOutput out = net.forward(t.state);
    loss.q_loss += huber(out.q[t.action] - t.q_target);
    loss.r_loss += huber(out.r_hat[t.action] - t.reward);
  }
  loss.q_loss /= static_cast<double>(batch.size());
  loss.r_loss /= static_cast<double>(batch.size());
  return loss;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace citylight
