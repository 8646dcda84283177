#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lettuce/common.hpp"
#include "lettuce/dataset.hpp"

namespace lettuce {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
/// "tanh" or "relu"; throws InvalidArgument otherwise.
Activation activation_from_string(const std::string& name);

struct HiddenLayer {
  std::size_t width = 4;
  Activation activation = Activation::Tanh;
  bool operator==(const HiddenLayer&) const = default;
};

/// Pass-through input, affine hidden layers with activation, affine output.
///
/// Flat parameter order: for every affine layer, its weights (row-major,
/// fan_out x fan_in) followed by its biases.
struct NetLayout {
  std::size_t input_dim = kFeatureWidth;
  std::vector<HiddenLayer> hidden{{4, Activation::Tanh}};
  std::size_t output_dim = kTargetWidth;

  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const NetLayout&) const = default;
};

double softplus(double x);
double inverse_softplus(double y);

/// Mean-field Gaussian posterior over the flat parameter vector. The spread
/// is sigma = softplus(rho); entries with mask == 0 are pruned and contribute
/// exactly zero.
struct BayesianMLP {
  NetLayout layout;
  std::vector<double> mu;
  std::vector<double> rho;
  std::vector<std::uint8_t> mask;

  double sigma(std::size_t i) const { return softplus(rho[i]); }
  std::size_t active_count() const;
  /// mask .* mu, the deterministic network at the posterior mean.
  std::vector<double> mean_values() const;
  void validate() const;

  bool operator==(const BayesianMLP&) const = default;
};

/// One deterministic draw p̂ⁱ and the standard-normal noise behind it.
struct ParamSample {
  std::vector<double> values;
  std::vector<double> epsilon;
};

BayesianMLP init_network(const NetLayout& layout, std::uint64_t seed, double init_sigma);

ParamSample sample_params(const BayesianMLP& net, std::uint64_t seed);
ParamSample sample_params(const BayesianMLP& net, Rng& rng);
/// values = mask .* (mu + sigma .* epsilon) for a given epsilon.
ParamSample params_from_noise(const BayesianMLP& net, std::vector<double> epsilon);

/// Reusable forward/backward buffers for one layout. Not thread-safe; use one
/// per thread.
class MlpEvaluator {
 public:
  explicit MlpEvaluator(const NetLayout& layout);

  /// Output of the network for one feature row. The returned span stays valid
  /// until the next call.
  std::span<const double> forward(std::span<const double> values, std::span<const double> input);

  /// Accumulates d(output . upstream)/d(values) into grad, using the buffers of
  /// the last forward() call.
  void backward(std::span<const double> values, std::span<const double> upstream,
                std::span<double> grad);

 private:
  struct Layer {
    std::size_t fan_in, fan_out, offset;
    bool has_activation;
    Activation activation;
  };
  std::vector<Layer> layers_;
  std::vector<std::vector<double>> acts_;  // acts_[0] = input, acts_[l+1] = output of layer l
  std::vector<std::vector<double>> pre_;   // pre-activations per layer
  std::vector<double> delta_, next_delta_;
};

/// Convenience wrapper that allocates its own evaluator.
std::vector<double> forward(std::span<const double> values, const NetLayout& layout,
                            std::span<const double> feature);

/// Row-major regression matrices, a view over Dataset storage or test data.
struct RegressionData {
  std::span<const double> features;
  std::size_t feature_width = 0;
  std::span<const double> targets;
  std::size_t target_width = 0;

  std::size_t rows() const { return feature_width ? features.size() / feature_width : 0; }
  static RegressionData of(const Dataset& dataset);
};

/// Terms of the training objective beyond the squared error.
struct Objective {
  double sparsity_lambda = 1e-4;  // weight of L1(mask .* mu)
  double kl_weight = 0.0;         // weight of KL(q || N(0, prior_sigma^2)) / total rows
  double prior_sigma = 1.0;
};

struct LossAndGrad {
  double loss = 0.0;
  double data_loss = 0.0;
  double penalty = 0.0;
  double kl = 0.0;
  std::vector<double> grad_mu;
  std::vector<double> grad_rho;
};

/// Monte-Carlo estimate of
///   mean over (samples, rows) of |target - f(row; p̂)|^2
///   + sparsity_lambda * |mask .* mu|_1 + kl_weight * KL / rows(data)
/// with pathwise (reparameterized) gradients. n_mc noise vectors are drawn
/// from `seed`.
LossAndGrad loss_and_grad(const BayesianMLP& net, const RegressionData& data,
                          std::span<const std::size_t> batch, std::size_t n_mc,
                          const Objective& objective, std::uint64_t seed);

/// Same objective for explicitly supplied noise vectors (one per MC sample).
LossAndGrad loss_and_grad_with_noise(const BayesianMLP& net, const RegressionData& data,
                                     std::span<const std::size_t> batch,
                                     std::span<const std::vector<double>> epsilons,
                                     const Objective& objective);

double l1_penalty(const BayesianMLP& net);
/// KL(q || N(0, prior_sigma^2)) summed over unmasked parameters.
double kl_divergence(const BayesianMLP& net, double prior_sigma);

/// Masks every parameter whose |mu| / sigma falls below threshold. Pruned
/// entries stay pruned.
BayesianMLP snr_prune(const BayesianMLP& net, double threshold);

}  // namespace lettuce
