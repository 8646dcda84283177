#include "lettuce/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

constexpr const char* kCheckpointFormat = "lettuce-bnode-checkpoint";
constexpr int kCheckpointVersion = 1;

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("train config field '") + key + "': " + e.what());
  }
}

std::vector<double> double_vector(const nlohmann::json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != n)
    throw SchemaMismatch(std::string("checkpoint.") + key + ": expected " + std::to_string(n) +
                         " entries");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!j[key][i].is_number())
      throw SchemaMismatch(std::string("checkpoint.") + key + ": non-numeric entry");
    v[i] = j[key][i].get<double>();
  }
  return v;
}

void check_layout(const NetLayout& found, const NetLayout& expected) {
  auto mismatch = [](const std::string& field, std::size_t want, std::size_t got) {
    throw SchemaMismatch("checkpoint layout." + field + ": expected " + std::to_string(want) +
                         ", found " + std::to_string(got));
  };
  if (found.input_dim != expected.input_dim)
    mismatch("input_dim", expected.input_dim, found.input_dim);
  if (found.output_dim != expected.output_dim)
    mismatch("output_dim", expected.output_dim, found.output_dim);
  if (found.hidden.size() != expected.hidden.size())
    mismatch("hidden (layer count)", expected.hidden.size(), found.hidden.size());
  for (std::size_t l = 0; l < found.hidden.size(); ++l) {
    const std::string field = "hidden[" + std::to_string(l) + "]";
    if (found.hidden[l].width != expected.hidden[l].width)
      mismatch(field + ".width", expected.hidden[l].width, found.hidden[l].width);
    if (found.hidden[l].activation != expected.hidden[l].activation)
      throw SchemaMismatch("checkpoint layout." + field + ".activation: expected " +
                           to_string(expected.hidden[l].activation) + ", found " +
                           to_string(found.hidden[l].activation));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs > 0 && (batch_size < 1 || n_mc < 1))
    throw InvalidArgument("train config: batch_size and n_mc must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train config: learning_rate must be > 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
    throw InvalidArgument("train config: final_lr_fraction must be in (0, 1]");
  if (sparsity_lambda < 0.0 || kl_weight < 0.0 || prune_threshold < 0.0)
    throw InvalidArgument("train config: weights and thresholds must be >= 0");
  if (!(prior_sigma > 0.0) || !(init_sigma > 0.0))
    throw InvalidArgument("train config: prior_sigma and init_sigma must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_epsilon > 0.0))
    throw InvalidArgument("train config: invalid Adam constants");
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"n_mc", c.n_mc},
          {"sparsity_lambda", c.sparsity_lambda},
          {"kl_weight", c.kl_weight},
          {"prior_sigma", c.prior_sigma},
          {"init_sigma", c.init_sigma},
          {"prune_threshold", c.prune_threshold},
          {"prune_every", c.prune_every},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw InvalidArgument("train config must be a JSON object");
  static const char* kKnown[] = {"epochs", "batch_size", "learning_rate", "final_lr_fraction", "n_mc",
                                 "sparsity_lambda", "kl_weight", "prior_sigma", "init_sigma",
                                 "prune_threshold", "prune_every", "seed", "beta1", "beta2",
                                 "adam_epsilon"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw InvalidArgument("train config: unknown field '" + key + "'");
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "final_lr_fraction", c.final_lr_fraction);
  read_field(j, "n_mc", c.n_mc);
  read_field(j, "sparsity_lambda", c.sparsity_lambda);
  read_field(j, "kl_weight", c.kl_weight);
  read_field(j, "prior_sigma", c.prior_sigma);
  read_field(j, "init_sigma", c.init_sigma);
  read_field(j, "prune_threshold", c.prune_threshold);
  read_field(j, "prune_every", c.prune_every);
  read_field(j, "seed", c.seed);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "adam_epsilon", c.adam_epsilon);
  c.validate();
  return c;
}

TrainResult train(const BayesianMLP& initial, const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  initial.validate();
  TrainResult result{initial, {}};
  if (config.epochs == 0) return result;
  if (dataset.rows() < config.batch_size)
    throw InsufficientData("train: dataset has " + std::to_string(dataset.rows()) +
                           " rows, fewer than batch_size " + std::to_string(config.batch_size));

  BayesianMLP& net = result.net;
  TrainHistory& history = result.history;
  const RegressionData data = RegressionData::of(dataset);
  const Objective objective = config.objective();
  const std::size_t n = net.mu.size();

  std::vector<double> m_mu(n, 0.0), v_mu(n, 0.0), m_rho(n, 0.0), v_rho(n, 0.0);
  std::vector<std::size_t> order(dataset.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, "batch-order"));
  const std::uint64_t noise_root = derive_seed(config.seed, "mc-noise");
  std::uint64_t step = 0;
  const std::size_t batches_per_epoch = (dataset.rows() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(config.epochs * batches_per_epoch);

  // Cosine decay from learning_rate to learning_rate * final_lr_fraction.
  auto step_size = [&](std::uint64_t t) {
    const double f = config.final_lr_fraction;
    const double progress = static_cast<double>(t) / total_steps;
    return config.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
  };

  auto adam = [&](double& param, double g, double& m, double& v, double bias1, double bias2,
                  double lr) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    param -= lr * (m / bias1) / (std::sqrt(v / bias2) + config.adam_epsilon);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double data_sum = 0.0;
    std::size_t batches = 0;

    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      const std::span<const std::size_t> batch(order.data() + first, count);
      const LossAndGrad lg =
          loss_and_grad(net, data, batch, config.n_mc, objective, derive_seed(noise_root, step));
      if (!std::isfinite(lg.loss))
        throw DivergedLoss("epoch " + std::to_string(epoch + 1) + ": loss is not finite");

      const double lr = step_size(step);
      ++step;
      const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < n; ++i) {
        if (!net.mask[i]) continue;
        adam(net.mu[i], lg.grad_mu[i], m_mu[i], v_mu[i], bias1, bias2, lr);
        adam(net.rho[i], lg.grad_rho[i], m_rho[i], v_rho[i], bias1, bias2, lr);
      }
      data_sum += lg.data_loss;
      ++batches;
    }

    if (config.prune_every > 0 && (epoch + 1) % config.prune_every == 0) {
      net = snr_prune(net, config.prune_threshold);
      for (std::size_t i = 0; i < n; ++i)
        if (!net.mask[i]) m_mu[i] = v_mu[i] = m_rho[i] = v_rho[i] = 0.0;
    }

    const double data_loss = data_sum / static_cast<double>(batches);
    const double penalty = config.sparsity_lambda * l1_penalty(net);
    const double kl = config.kl_weight == 0.0
                          ? 0.0
                          : config.kl_weight / static_cast<double>(dataset.rows()) *
                                kl_divergence(net, config.prior_sigma);
    const double total = data_loss + penalty + kl;
    if (!std::isfinite(total))
      throw DivergedLoss("epoch " + std::to_string(epoch + 1) + ": loss is not finite");

    history.total_loss.push_back(total);
    history.data_loss.push_back(data_loss);
    history.penalty.push_back(penalty);
    history.kl.push_back(kl);
    history.active_params.push_back(net.active_count());
  }
  return result;
}

void write_history_csv(std::ostream& out, const TrainHistory& h) {
  out << "epoch,total_loss,data_loss,penalty,active_params\n";
  for (std::size_t e = 0; e < h.epochs(); ++e)
    out << e + 1 << ',' << format_double(h.total_loss[e]) << ',' << format_double(h.data_loss[e])
        << ',' << format_double(h.penalty[e]) << ',' << h.active_params[e] << '\n';
}

nlohmann::ordered_json layout_to_json(const NetLayout& layout) {
  auto hidden = nlohmann::ordered_json::array();
  for (const auto& h : layout.hidden)
    hidden.push_back({{"width", h.width}, {"activation", to_string(h.activation)}});
  return {{"input_dim", layout.input_dim}, {"hidden", hidden}, {"output_dim", layout.output_dim}};
}

NetLayout layout_from_json(const nlohmann::json& j) {
  try {
    NetLayout layout;
    layout.input_dim = j.at("input_dim").get<std::size_t>();
    layout.output_dim = j.at("output_dim").get<std::size_t>();
    layout.hidden.clear();
    for (const auto& h : j.at("hidden"))
      layout.hidden.push_back(
          {h.at("width").get<std::size_t>(), activation_from_string(h.at("activation"))});
    layout.validate();
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("layout: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaMismatch(std::string("layout: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  c.net.validate();
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["layout"] = layout_to_json(c.net.layout);
  j["mu"] = c.net.mu;
  j["rho"] = c.net.rho;
  j["mask"] = c.net.mask;
  j["stats"] = stats_to_json(c.stats);
  j["train_config"] = train_config_to_json(c.config);
  j["config_hash"] = c.config_hash;
  j["training_seed"] = c.config.seed;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetLayout* expected_layout) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaMismatch(path.string() + ": not a complete checkpoint (" + e.what() + ")");
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw SchemaMismatch(path.string() + ": not a lettuce-bnode checkpoint");
  if (!j.contains("version") || j["version"] != kCheckpointVersion)
    throw SchemaMismatch(path.string() + ": unsupported checkpoint version");
  for (const char* key : {"layout", "mu", "rho", "mask", "stats", "train_config"})
    if (!j.contains(key)) throw SchemaMismatch(path.string() + ": missing field '" + key + "'");

  Checkpoint c;
  c.net.layout = layout_from_json(j["layout"]);
  if (expected_layout) check_layout(c.net.layout, *expected_layout);

  const std::size_t n = c.net.layout.parameter_count();
  c.net.mu = double_vector(j, "mu", n);
  c.net.rho = double_vector(j, "rho", n);
  const auto mask = double_vector(j, "mask", n);
  c.net.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0) throw SchemaMismatch("checkpoint.mask: entries must be 0/1");
    c.net.mask[i] = mask[i] == 1.0 ? 1 : 0;
  }
  c.stats = stats_from_json(j["stats"]);
  try {
    c.config = train_config_from_json(j["train_config"]);
  } catch (const InvalidArgument& e) {
    throw SchemaMismatch(std::string("checkpoint.train_config: ") + e.what());
  }
  c.config_hash = j.value("config_hash", "");
  try {
    c.net.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaMismatch(std::string("checkpoint: ") + e.what());
  }
  return c;
}

}  // namespace lettuce
