#include "lettuce/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <boost/math/distributions/normal.hpp>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

std::string level_label(double level) {
  const double pct = level * 100.0;
  const double rounded = std::round(pct);
  if (std::abs(pct - rounded) < 1e-9) return std::to_string(static_cast<long>(rounded));
  std::string s = format_double(pct);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

bool all_finite(const Vec4& v) {
  return std::all_of(v.begin(), v.end(), [](double c) { return std::isfinite(c); });
}

}  // namespace

std::string to_string(RolloutSpace s) {
  return s == RolloutSpace::Physical ? "physical" : "normalized";
}

RolloutSpace rollout_space_from_string(const std::string& s) {
  if (s == "physical") return RolloutSpace::Physical;
  if (s == "normalized") return RolloutSpace::Normalized;
  throw InvalidArgument("unknown rollout space '" + s + "'");
}

std::string to_string(BandMethod m) { return m == BandMethod::Empirical ? "empirical" : "gaussian"; }

BandMethod band_method_from_string(const std::string& s) {
  if (s == "empirical") return BandMethod::Empirical;
  if (s == "gaussian") return BandMethod::Gaussian;
  throw InvalidArgument("unknown band method '" + s + "'");
}

std::vector<GreenhouseState> euler_rollout(const NormalizedVectorField& field,
                                           const NormStats& stats, const GreenhouseState& x0,
                                           std::span<const ControlInput> u_seq,
                                           std::span<const Disturbance> d_seq, double h,
                                           RolloutSpace space) {
  if (u_seq.size() != d_seq.size())
    throw LengthMismatch("euler_rollout: control and disturbance sequences differ in length");
  if (u_seq.empty()) throw InvalidArgument("euler_rollout: horizon must be >= 1");

  std::vector<GreenhouseState> out;
  out.reserve(u_seq.size() + 1);
  out.push_back(x0);
  Vec4 x = x0.to_array();
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    const auto feature = make_feature(GreenhouseState::from_array(x), u_seq[k], d_seq[k], stats);
    const Vec4 f = field(feature);
    if (space == RolloutSpace::Physical) {
      const Vec4 dx = denormalize(f, stats.mean_dx, stats.std_dx);
      for (std::size_t i = 0; i < 4; ++i) x[i] += h * dx[i];
    } else {
      Vec4 xn = normalize(x, stats.mean_x, stats.std_x);
      for (std::size_t i = 0; i < 4; ++i) xn[i] += h * f[i];
      x = denormalize(xn, stats.mean_x, stats.std_x);
    }
    if (!all_finite(x)) throw NonFiniteState("euler_rollout produced a non-finite state", k);
    out.push_back(GreenhouseState::from_array(x));
  }
  return out;
}

std::vector<GreenhouseState> euler_rollout(const ParamSample& sample, const NetLayout& layout,
                                           const NormStats& stats, const GreenhouseState& x0,
                                           std::span<const ControlInput> u_seq,
                                           std::span<const Disturbance> d_seq, double h,
                                           RolloutSpace space) {
  if (layout.input_dim != kFeatureWidth || layout.output_dim != kTargetWidth)
    throw InvalidArgument("euler_rollout: layout must map 11 features to 4 derivatives");
  if (sample.values.size() != layout.parameter_count())
    throw InvalidArgument("euler_rollout: sample does not match layout");
  MlpEvaluator eval(layout);
  auto field = [&](const std::array<double, kFeatureWidth>& feature) {
    const auto y = eval.forward(sample.values, feature);
    return Vec4{y[0], y[1], y[2], y[3]};
  };
  return euler_rollout(field, stats, x0, u_seq, d_seq, h, space);
}

ForecastEnsemble ensemble_forecast(const BayesianMLP& net, const NormStats& stats,
                                   const GreenhouseState& x0,
                                   std::span<const ControlInput> u_seq,
                                   std::span<const Disturbance> d_seq, std::size_t n_samples,
                                   double h, std::uint64_t seed, const EnsembleOptions& options) {
  if (n_samples < 1) throw InvalidArgument("ensemble_forecast: n_samples must be >= 1");
  net.validate();

  ForecastEnsemble ens;
  ens.period_s = h;
  ens.start_step = options.start_step;
  ens.seeds.resize(n_samples);
  ens.trajectories.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) ens.seeds[i] = derive_seed(seed, i);

  parallel_for(n_samples, [&](std::size_t i) {
    try {
      ens.trajectories[i] = euler_rollout(sample_params(net, ens.seeds[i]), net.layout, stats, x0,
                                          u_seq, d_seq, h, options.space);
    } catch (Error& e) {
      e.add_context("ensemble member " + std::to_string(i));
      throw;
    }
  });
  return ens;
}

double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("empirical_quantile: no data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ForecastSummary summarize(const ForecastEnsemble& ensemble, std::span<const double> levels,
                          BandMethod method) {
  const std::size_t members = ensemble.members();
  if (members == 0) throw TooFewMembers("summarize: empty ensemble");
  const std::size_t steps = ensemble.trajectories[0].size();
  for (const auto& t : ensemble.trajectories)
    if (t.size() != steps) throw LengthMismatch("summarize: members differ in length");

  for (double level : levels) {
    if (!(level >= 0.0 && level < 1.0))
      throw InvalidArgument("summarize: confidence level must be in [0, 1)");
    if (level > 0.0 && members < 2)
      throw TooFewMembers("summarize: a nontrivial band needs at least 2 members");
    if (method == BandMethod::Empirical &&
        level > 1.0 - 1.0 / static_cast<double>(members) + 1e-12)
      throw TooFewMembers("summarize: level " + format_double(level) + " needs more than " +
                          std::to_string(members) + " members");
  }

  ForecastSummary s;
  s.levels.assign(levels.begin(), levels.end());
  s.mean.assign(steps, Vec4{});
  s.lower.assign(levels.size(), std::vector<Vec4>(steps));
  s.upper.assign(levels.size(), std::vector<Vec4>(steps));

  const boost::math::normal standard_normal;
  std::vector<double> column(members);
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t m = 0; m < members; ++m) column[m] = ensemble.trajectories[m][k].to_array()[c];
      double mean = 0.0;
      for (double v : column) mean += v;
      mean /= static_cast<double>(members);
      s.mean[k][c] = mean;

      if (method == BandMethod::Empirical) {
        std::sort(column.begin(), column.end());
        for (std::size_t l = 0; l < levels.size(); ++l) {
          s.lower[l][k][c] = empirical_quantile(column, (1.0 - levels[l]) / 2.0);
          s.upper[l][k][c] = empirical_quantile(column, (1.0 + levels[l]) / 2.0);
        }
      } else {
        double var = 0.0;
        for (double v : column) var += (v - mean) * (v - mean);
        const double sd = members > 1 ? std::sqrt(var / static_cast<double>(members - 1)) : 0.0;
        for (std::size_t l = 0; l < levels.size(); ++l) {
          const double z =
              levels[l] > 0.0 ? boost::math::quantile(standard_normal, (1.0 + levels[l]) / 2.0) : 0.0;
          s.lower[l][k][c] = mean - z * sd;
          s.upper[l][k][c] = mean + z * sd;
        }
      }
    }
  }
  return s;
}

ForecastScore score(const ForecastSummary& summary, std::span<const GreenhouseState> truth) {
  const std::size_t steps = summary.mean.size();
  if (truth.size() != steps)
    throw LengthMismatch("score: truth has " + std::to_string(truth.size()) +
                         " steps, forecast has " + std::to_string(steps));
  if (steps == 0) throw LengthMismatch("score: empty forecast");

  ForecastScore out;
  out.levels = summary.levels;
  out.coverage.assign(summary.levels.size(), Vec4{});
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec4 t = truth[k].to_array();
    for (std::size_t c = 0; c < 4; ++c) {
      const double e = summary.mean[k][c] - t[c];
      out.rmse[c] += e * e;
      for (std::size_t l = 0; l < summary.levels.size(); ++l)
        if (t[c] >= summary.lower[l][k][c] && t[c] <= summary.upper[l][k][c])
          out.coverage[l][c] += 1.0;
    }
  }
  const auto n = static_cast<double>(steps);
  for (double& r : out.rmse) r = std::sqrt(r / n);
  for (auto& cov : out.coverage)
    for (double& c : cov) c /= n;
  return out;
}

Vec4 normalized_rmse(const ForecastScore& s, const NormStats& stats) {
  Vec4 out;
  for (std::size_t c = 0; c < 4; ++c) out[c] = s.rmse[c] / stats.std_x[c];
  return out;
}

void write_forecast_csv(std::ostream& out, const ForecastSummary& summary, double period_s,
                        std::size_t start_step,
                        std::optional<std::span<const GreenhouseState>> truth) {
  if (truth && truth->size() != summary.mean.size())
    throw LengthMismatch("forecast CSV: truth length differs from the forecast");

  out << "step,time_s,state,mean";
  for (double level : summary.levels) {
    const std::string label = level_label(level);
    out << ",lo" << label << ",hi" << label;
  }
  out << ",truth\n";

  static constexpr const char* kStates[] = {"x1", "x2", "x3", "x4"};
  for (std::size_t k = 0; k < summary.mean.size(); ++k) {
    const std::size_t step = start_step + k;
    const std::string time = format_double(static_cast<double>(step) * period_s);
    for (std::size_t c = 0; c < 4; ++c) {
      out << step << ',' << time << ',' << kStates[c] << ',' << format_double(summary.mean[k][c]);
      for (std::size_t l = 0; l < summary.levels.size(); ++l)
        out << ',' << format_double(summary.lower[l][k][c]) << ','
            << format_double(summary.upper[l][k][c]);
      out << ',';
      if (truth) out << format_double((*truth)[k].to_array()[c]);
      out << '\n';
    }
  }
}

nlohmann::ordered_json score_to_json(const ForecastScore& s, const NormStats& stats) {
  nlohmann::ordered_json j;
  j["rmse"] = s.rmse;
  j["rmse_normalized"] = normalized_rmse(s, stats);
  auto cov = nlohmann::ordered_json::object();
  for (std::size_t l = 0; l < s.levels.size(); ++l) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", s.levels[l]);
    cov[key] = s.coverage[l];
  }
  j["levels"] = s.levels;
  j["coverage"] = cov;
  return j;
}

}  // namespace lettuce
