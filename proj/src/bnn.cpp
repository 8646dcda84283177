#include "lettuce/bnn.hpp"

#include <algorithm>
#include <cmath>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::Relu:
      return z > 0.0 ? z : 0.0;
  }
  return z;
}

/// Derivative expressed through the pre-activation z and output y.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::Tanh:
      return 1.0 - y * y;
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::size_t NetLayout::parameter_count() const {
  std::size_t count = 0;
  std::size_t fan_in = input_dim;
  for (const auto& h : hidden) {
    count += fan_in * h.width + h.width;
    fan_in = h.width;
  }
  return count + fan_in * output_dim + output_dim;
}

void NetLayout::validate() const {
  if (input_dim < 1 || output_dim < 1) throw InvalidArgument("layout: dimensions must be >= 1");
  for (const auto& h : hidden)
    if (h.width < 1) throw InvalidArgument("layout: hidden widths must be >= 1");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw InvalidArgument("inverse_softplus: argument must be positive");
  // log(expm1(y)) rearranged to stay finite for large y.
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

std::size_t BayesianMLP::active_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<double> BayesianMLP::mean_values() const {
  std::vector<double> v(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) v[i] = mask[i] ? mu[i] : 0.0;
  return v;
}

void BayesianMLP::validate() const {
  layout.validate();
  const std::size_t n = layout.parameter_count();
  if (mu.size() != n || rho.size() != n || mask.size() != n)
    throw InvalidArgument("network vectors do not match the layout parameter count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(rho[i]))
      throw InvalidArgument("network parameters must be finite");
    if (mask[i] > 1) throw InvalidArgument("mask entries must be 0 or 1");
  }
}

BayesianMLP init_network(const NetLayout& layout, std::uint64_t seed, double init_sigma) {
  layout.validate();
  if (!(init_sigma > 0.0)) throw InvalidArgument("init_sigma must be positive");

  BayesianMLP net;
  net.layout = layout;
  const std::size_t n = layout.parameter_count();
  net.mu.assign(n, 0.0);
  net.rho.assign(n, inverse_softplus(init_sigma));
  net.mask.assign(n, 1);

  Rng rng(seed);
  std::size_t offset = 0;
  std::size_t fan_in = layout.input_dim;
  auto fill_layer = [&](std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) net.mu[offset + i] = uniform(rng);
    offset += fan_in * fan_out + fan_out;  // biases start at zero
    fan_in = fan_out;
  };
  for (const auto& h : layout.hidden) fill_layer(h.width);
  fill_layer(layout.output_dim);
  return net;
}

ParamSample params_from_noise(const BayesianMLP& net, std::vector<double> epsilon) {
  if (epsilon.size() != net.mu.size()) throw InvalidArgument("noise vector has the wrong size");
  ParamSample s;
  s.values.resize(net.mu.size());
  for (std::size_t i = 0; i < net.mu.size(); ++i)
    s.values[i] = net.mask[i] ? net.mu[i] + net.sigma(i) * epsilon[i] : 0.0;
  s.epsilon = std::move(epsilon);
  return s;
}

ParamSample sample_params(const BayesianMLP& net, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(net.mu.size());
  for (double& e : eps) e = normal(rng);
  return params_from_noise(net, std::move(eps));
}

ParamSample sample_params(const BayesianMLP& net, std::uint64_t seed) {
  Rng rng(seed);
  return sample_params(net, rng);
}

MlpEvaluator::MlpEvaluator(const NetLayout& layout) {
  layout.validate();
  std::size_t offset = 0;
  std::size_t fan_in = layout.input_dim;
  acts_.emplace_back(fan_in);
  for (const auto& h : layout.hidden) {
    layers_.push_back({fan_in, h.width, offset, true, h.activation});
    offset += fan_in * h.width + h.width;
    fan_in = h.width;
  }
  layers_.push_back({fan_in, layout.output_dim, offset, false, Activation::Tanh});

  std::size_t widest = layout.input_dim;
  for (const auto& l : layers_) {
    acts_.emplace_back(l.fan_out);
    pre_.emplace_back(l.fan_out);
    widest = std::max(widest, l.fan_out);
  }
  delta_.resize(widest);
  next_delta_.resize(widest);
}

std::span<const double> MlpEvaluator::forward(std::span<const double> values,
                                              std::span<const double> input) {
  std::copy(input.begin(), input.end(), acts_[0].begin());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const double* w = values.data() + L.offset;
    const double* b = w + L.fan_in * L.fan_out;
    const std::vector<double>& a = acts_[l];
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      double z = b[o];
      const double* row = w + o * L.fan_in;
      for (std::size_t i = 0; i < L.fan_in; ++i) z += row[i] * a[i];
      pre_[l][o] = z;
      acts_[l + 1][o] = L.has_activation ? activate(L.activation, z) : z;
    }
  }
  return acts_.back();
}

void MlpEvaluator::backward(std::span<const double> values, std::span<const double> upstream,
                            std::span<double> grad) {
  std::copy(upstream.begin(), upstream.end(), delta_.begin());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    if (L.has_activation)
      for (std::size_t o = 0; o < L.fan_out; ++o)
        delta_[o] *= activate_grad(L.activation, pre_[l][o], acts_[l + 1][o]);

    const double* w = values.data() + L.offset;
    double* gw = grad.data() + L.offset;
    double* gb = gw + L.fan_in * L.fan_out;
    const std::vector<double>& a = acts_[l];
    std::fill(next_delta_.begin(), next_delta_.begin() + static_cast<long>(L.fan_in), 0.0);
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      const double d = delta_[o];
      gb[o] += d;
      for (std::size_t i = 0; i < L.fan_in; ++i) {
        gw[o * L.fan_in + i] += d * a[i];
        next_delta_[i] += w[o * L.fan_in + i] * d;
      }
    }
    std::swap(delta_, next_delta_);
  }
}

std::vector<double> forward(std::span<const double> values, const NetLayout& layout,
                            std::span<const double> feature) {
  if (values.size() != layout.parameter_count())
    throw InvalidArgument("forward: parameter vector does not match layout");
  if (feature.size() != layout.input_dim) throw InvalidArgument("forward: wrong input width");
  MlpEvaluator eval(layout);
  const auto out = eval.forward(values, feature);
  return {out.begin(), out.end()};
}

RegressionData RegressionData::of(const Dataset& dataset) {
  return {dataset.features(), kFeatureWidth, dataset.targets(), kTargetWidth};
}

double l1_penalty(const BayesianMLP& net) {
  double s = 0.0;
  for (std::size_t i = 0; i < net.mu.size(); ++i)
    if (net.mask[i]) s += std::abs(net.mu[i]);
  return s;
}

double kl_divergence(const BayesianMLP& net, double prior_sigma) {
  const double prior_var = prior_sigma * prior_sigma;
  double kl = 0.0;
  for (std::size_t i = 0; i < net.mu.size(); ++i) {
    if (!net.mask[i]) continue;
    const double s = net.sigma(i);
    kl += std::log(prior_sigma / s) + (s * s + net.mu[i] * net.mu[i]) / (2.0 * prior_var) - 0.5;
  }
  return kl;
}

LossAndGrad loss_and_grad_with_noise(const BayesianMLP& net, const RegressionData& data,
                                     std::span<const std::size_t> batch,
                                     std::span<const std::vector<double>> epsilons,
                                     const Objective& objective) {
  if (batch.empty()) throw EmptyBatch("loss_and_grad: empty batch");
  if (epsilons.empty()) throw InvalidArgument("loss_and_grad: need at least one MC sample");
  const NetLayout& layout = net.layout;
  if (data.feature_width != layout.input_dim || data.target_width != layout.output_dim)
    throw InvalidArgument("loss_and_grad: data widths do not match the layout");

  const std::size_t n = net.mu.size();
  const std::size_t width = layout.output_dim;
  const double scale = 1.0 / (static_cast<double>(epsilons.size()) * static_cast<double>(batch.size()));

  LossAndGrad out;
  out.grad_mu.assign(n, 0.0);
  out.grad_rho.assign(n, 0.0);

  MlpEvaluator eval(layout);
  std::vector<double> grad_values(n);
  std::vector<double> residual(width);
  double sse = 0.0;

  for (const auto& eps : epsilons) {
    const ParamSample sample = params_from_noise(net, eps);
    std::fill(grad_values.begin(), grad_values.end(), 0.0);
    for (std::size_t row : batch) {
      if (row >= data.rows()) throw InvalidArgument("loss_and_grad: batch index out of range");
      const auto y = eval.forward(sample.values, data.features.subspan(row * data.feature_width,
                                                                       data.feature_width));
      const auto t = data.targets.subspan(row * width, width);
      for (std::size_t o = 0; o < width; ++o) {
        const double r = y[o] - t[o];
        sse += r * r;
        residual[o] = 2.0 * r;
      }
      eval.backward(sample.values, residual, grad_values);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!net.mask[i]) continue;
      out.grad_mu[i] += scale * grad_values[i];
      out.grad_rho[i] += scale * grad_values[i] * eps[i] * sigmoid(net.rho[i]);
    }
  }
  out.data_loss = scale * sse;

  if (objective.sparsity_lambda != 0.0) {
    out.penalty = objective.sparsity_lambda * l1_penalty(net);
    for (std::size_t i = 0; i < n; ++i) {
      if (!net.mask[i] || net.mu[i] == 0.0) continue;
      out.grad_mu[i] += objective.sparsity_lambda * (net.mu[i] > 0.0 ? 1.0 : -1.0);
    }
  }

  if (objective.kl_weight != 0.0) {
    const double w = objective.kl_weight / static_cast<double>(data.rows());
    const double prior_var = objective.prior_sigma * objective.prior_sigma;
    out.kl = w * kl_divergence(net, objective.prior_sigma);
    for (std::size_t i = 0; i < n; ++i) {
      if (!net.mask[i]) continue;
      const double s = net.sigma(i);
      out.grad_mu[i] += w * net.mu[i] / prior_var;
      out.grad_rho[i] += w * (s / prior_var - 1.0 / s) * sigmoid(net.rho[i]);
    }
  }

  out.loss = out.data_loss + out.penalty + out.kl;
  return out;
}

LossAndGrad loss_and_grad(const BayesianMLP& net, const RegressionData& data,
                          std::span<const std::size_t> batch, std::size_t n_mc,
                          const Objective& objective, std::uint64_t seed) {
  if (n_mc < 1) throw InvalidArgument("loss_and_grad: n_mc must be >= 1");
  if (batch.empty()) throw EmptyBatch("loss_and_grad: empty batch");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> eps(n_mc, std::vector<double>(net.mu.size()));
  for (auto& e : eps)
    for (double& v : e) v = normal(rng);
  return loss_and_grad_with_noise(net, data, batch, eps, objective);
}

BayesianMLP snr_prune(const BayesianMLP& net, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidArgument("snr_prune: threshold must be >= 0");
  BayesianMLP out = net;
  for (std::size_t i = 0; i < out.mu.size(); ++i)
    if (out.mask[i] && std::abs(out.mu[i]) / out.sigma(i) < threshold) out.mask[i] = 0;
  return out;
}

}  // namespace lettuce
