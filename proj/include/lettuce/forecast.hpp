#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lettuce/bnn.hpp"
#include "lettuce/dataset.hpp"

namespace lettuce {

/// Maps a normalized feature row (x̄, ū, d̄) to a normalized state derivative.
using NormalizedVectorField =
    std::function<Vec4(const std::array<double, kFeatureWidth>& feature)>;

enum class RolloutSpace {
  /// Denormalize the predicted derivative and step x in physical units.
  Physical,
  /// Step the normalized state directly: x̄ += h * f̂. Kept for comparison;
  /// it mixes normalized and per-second units and diverges for large h.
  Normalized,
};

enum class BandMethod { Empirical, Gaussian };

std::string to_string(RolloutSpace s);
RolloutSpace rollout_space_from_string(const std::string& s);
std::string to_string(BandMethod m);
BandMethod band_method_from_string(const std::string& s);

/// Forward-Euler rollout of a normalized vector field. Returns H+1 states
/// starting at x0; throws NonFiniteState with the failing step.
std::vector<GreenhouseState> euler_rollout(const NormalizedVectorField& field,
                                           const NormStats& stats, const GreenhouseState& x0,
                                           std::span<const ControlInput> u_seq,
                                           std::span<const Disturbance> d_seq, double h,
                                           RolloutSpace space = RolloutSpace::Physical);

/// Rollout of one sampled network.
std::vector<GreenhouseState> euler_rollout(const ParamSample& sample, const NetLayout& layout,
                                           const NormStats& stats, const GreenhouseState& x0,
                                           std::span<const ControlInput> u_seq,
                                           std::span<const Disturbance> d_seq, double h,
                                           RolloutSpace space = RolloutSpace::Physical);

struct ForecastEnsemble {
  std::vector<std::vector<GreenhouseState>> trajectories;  // [member][step]
  double period_s = 0.0;
  std::size_t start_step = 0;
  std::vector<std::uint64_t> seeds;

  std::size_t members() const { return trajectories.size(); }
  std::size_t horizon() const { return trajectories.empty() ? 0 : trajectories[0].size() - 1; }
};

struct EnsembleOptions {
  RolloutSpace space = RolloutSpace::Physical;
  std::size_t start_step = 0;
};

/// n_samples parameter draws (member i seeded with derive_seed(seed, i)),
/// each rolled out from the known x0 under the known inputs. Members are
/// independent; the result does not depend on the worker count.
ForecastEnsemble ensemble_forecast(const BayesianMLP& net, const NormStats& stats,
                                   const GreenhouseState& x0,
                                   std::span<const ControlInput> u_seq,
                                   std::span<const Disturbance> d_seq, std::size_t n_samples,
                                   double h, std::uint64_t seed,
                                   const EnsembleOptions& options = {});

struct ForecastSummary {
  std::vector<Vec4> mean;                 // [step]
  std::vector<double> levels;
  std::vector<std::vector<Vec4>> lower;   // [level][step]
  std::vector<std::vector<Vec4>> upper;   // [level][step]
};

/// Linearly interpolated empirical quantile of sorted data (position q*(n-1)).
double empirical_quantile(std::span<const double> sorted, double q);

/// Pointwise mean plus a band per level. Empirical bands need
/// level <= 1 - 1/members (each tail holds at least half a member), and
/// throws TooFewMembers otherwise.
ForecastSummary summarize(const ForecastEnsemble& ensemble, std::span<const double> levels,
                          BandMethod method = BandMethod::Empirical);

struct ForecastScore {
  Vec4 rmse{};
  std::vector<double> levels;
  std::vector<Vec4> coverage;  // [level]
};

ForecastScore score(const ForecastSummary& summary, std::span<const GreenhouseState> truth);

/// RMSE expressed in normalized state units (divided by std_x).
Vec4 normalized_rmse(const ForecastScore& s, const NormStats& stats);

/// Long format: `step,time_s,state,mean,lo95,hi95,lo99,hi99,truth`, one row per
/// state per step. Band columns follow `summary.levels`; the truth column is
/// empty when no truth is supplied.
void write_forecast_csv(std::ostream& out, const ForecastSummary& summary, double period_s,
                        std::size_t start_step,
                        std::optional<std::span<const GreenhouseState>> truth = std::nullopt);

nlohmann::ordered_json score_to_json(const ForecastScore& s, const NormStats& stats);

}  // namespace lettuce
