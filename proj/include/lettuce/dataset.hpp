#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lettuce/datagen.hpp"

namespace lettuce {

/// Lower bound applied to every standard deviation.
inline constexpr double kStdFloor = 1e-8;

/// Feature columns: x (4), u (3), d (4).
inline constexpr std::size_t kFeatureWidth = 11;
inline constexpr std::size_t kTargetWidth = 4;

/// Per-channel sample means and (Bessel) standard deviations.
struct NormStats {
  Vec4 mean_x{}, std_x{};
  Vec3 mean_u{}, std_u{};
  Vec4 mean_d{}, std_d{};
  Vec4 mean_dx{}, std_dx{};

  bool operator==(const NormStats&) const = default;

  /// Concatenated (x, u, d) means/stds in feature column order.
  std::array<double, kFeatureWidth> feature_mean() const;
  std::array<double, kFeatureWidth> feature_std() const;
};

template <std::size_t N>
std::array<double, N> normalize(const std::array<double, N>& v, const std::array<double, N>& mean,
                                const std::array<double, N>& std) {
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = (v[i] - mean[i]) / std[i];
  return out;
}

template <std::size_t N>
std::array<double, N> denormalize(const std::array<double, N>& v,
                                  const std::array<double, N>& mean,
                                  const std::array<double, N>& std) {
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i] * std[i] + mean[i];
  return out;
}

/// (x_k1 - x_k) / h.
StateDerivative fd_target(const GreenhouseState& x_k, const GreenhouseState& x_k1, double h);

/// Pooled over every scenario j and every usable step k = 0..N_j-1, so the
/// statistics describe exactly the rows that build_matrices emits.
NormStats compute_stats(std::span<const Scenario> scenarios, double h);

/// Normalized feature row (x̄, ū, d̄).
std::array<double, kFeatureWidth> make_feature(const GreenhouseState& x, const ControlInput& u,
                                               const Disturbance& d, const NormStats& stats);

/// Row-major feature/target matrices for training.
class Dataset {
 public:
  struct RowId {
    std::size_t scenario;
    std::size_t step;
    bool operator==(const RowId&) const = default;
  };

  Dataset(std::vector<double> features, std::vector<double> targets, NormStats stats,
          std::vector<RowId> row_index);

  std::size_t rows() const { return row_index_.size(); }
  std::span<const double> feature_row(std::size_t i) const {
    return {features_.data() + i * kFeatureWidth, kFeatureWidth};
  }
  std::span<const double> target_row(std::size_t i) const {
    return {targets_.data() + i * kTargetWidth, kTargetWidth};
  }
  const std::vector<double>& features() const { return features_; }
  const std::vector<double>& targets() const { return targets_; }
  const NormStats& stats() const { return stats_; }
  const std::vector<RowId>& row_index() const { return row_index_; }

 private:
  std::vector<double> features_;
  std::vector<double> targets_;
  NormStats stats_;
  std::vector<RowId> row_index_;
};

Dataset build_matrices(std::span<const Scenario> scenarios, const NormStats& stats, double h);

nlohmann::ordered_json stats_to_json(const NormStats& stats);
/// Throws SchemaMismatch on missing or malformed fields.
NormStats stats_from_json(const nlohmann::json& j);

/// features.csv, targets.csv and stats.json in `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace lettuce
