#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lettuce/bnn.hpp"
#include "lettuce/dataset.hpp"

namespace lettuce {

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-2;
  // Cosine decay to learning_rate * final_lr_fraction over the run; 1 keeps it constant.
  double final_lr_fraction = 1.0;
  std::size_t n_mc = 6;
  double sparsity_lambda = 1e-4;
  double kl_weight = 5.0;
  double prior_sigma = 1.0;
  double init_sigma = 0.05;
  double prune_threshold = 0.1;
  std::size_t prune_every = 100;  // 0 disables pruning
  std::uint64_t seed = 0;
  // Adam moment decay and stabilizer.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  Objective objective() const { return {sparsity_lambda, kl_weight, prior_sigma}; }
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& c);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct TrainHistory {
  std::vector<double> total_loss;
  std::vector<double> data_loss;
  std::vector<double> penalty;  // sparsity_lambda * L1(mask .* mu) at epoch end
  std::vector<double> kl;       // weighted KL term at epoch end
  std::vector<std::size_t> active_params;

  std::size_t epochs() const { return total_loss.size(); }
};

struct TrainResult {
  BayesianMLP net;
  TrainHistory history;
};

/// Mini-batch Adam on (mu, rho). Batch order and Monte-Carlo noise are drawn
/// from config.seed, so the result is a pure function of the inputs.
TrainResult train(const BayesianMLP& net, const Dataset& dataset, const TrainConfig& config);

/// `epoch,total_loss,data_loss,penalty,active_params`, epochs numbered from 1.
void write_history_csv(std::ostream& out, const TrainHistory& history);

struct Checkpoint {
  BayesianMLP net;
  NormStats stats;
  TrainConfig config;
  std::string config_hash;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws SchemaMismatch on truncated/malformed files, version mismatch, or
/// (when `expected_layout` is given) a layout that differs from it.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const NetLayout* expected_layout = nullptr);

nlohmann::ordered_json layout_to_json(const NetLayout& layout);
NetLayout layout_from_json(const nlohmann::json& j);

}  // namespace lettuce
